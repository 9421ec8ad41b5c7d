#include "cli/app.hpp"

int main(int argc, char** argv) { return warp::cli::run_app({argv + 1, argv + argc}); }
