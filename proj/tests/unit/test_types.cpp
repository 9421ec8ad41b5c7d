#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "warp/types.hpp"

using namespace warp;

TEST(BoundingBox, AreaOfSquareAndRectangle) {
  EXPECT_DOUBLE_EQ(box_area({0, 0, 10, 10}), 100.0);
  EXPECT_DOUBLE_EQ(box_area({2, 3, 7, 5}), 10.0);
}

TEST(BoundingBox, AreaOfPatchBoxMatchesLatticeCount) {
  const BoundingBox b{0, 0, 25, 25};
  int pixels = 0;
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) pixels += (x + 0.5 > b.x_min && x + 0.5 < b.x_max && y + 0.5 > b.y_min && y + 0.5 < b.y_max);
  EXPECT_EQ(pixels, 625);
  EXPECT_DOUBLE_EQ(box_area(b), 625.0);
}

TEST(BoundingBox, DegenerateBoxesAreRejected) {
  EXPECT_FALSE((BoundingBox{5, 5, 5, 10}.valid()));
  EXPECT_FALSE((BoundingBox{5, 5, 4, 10}.valid()));
  EXPECT_THROW(box_area({1, 1, 1, 2}), std::invalid_argument);
}

TEST(BoundingBox, FormatConversions) {
  EXPECT_EQ(BoundingBox::from_xywh(1, 2, 3, 4), (BoundingBox{1, 2, 4, 6}));
  EXPECT_EQ(BoundingBox::from_cxcywh(5, 5, 4, 2), (BoundingBox{3, 4, 7, 6}));
}

TEST(BoundingBox, ClippingNeverGrowsArea) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-50, 150);
  for (int i = 0; i < 500; ++i) {
    double a = u(gen), b = u(gen), c = u(gen), d = u(gen);
    BoundingBox box{std::min(a, b), std::min(c, d), std::max(a, b) + 0.1, std::max(c, d) + 0.1};
    const BoundingBox clipped = clip_box(box, 100, 80);
    if (!clipped.valid()) continue;
    EXPECT_LE(box_area(clipped), box_area(box) + 1e-9);
    EXPECT_GE(clipped.x_min, 0.0);
    EXPECT_LE(clipped.x_max, 100.0);
    EXPECT_GE(clipped.y_min, 0.0);
    EXPECT_LE(clipped.y_max, 80.0);
  }
}

TEST(ImageClass, EmptyDetectionsAreFalseNegative) {
  EXPECT_EQ(classify_image_outcome({}), ImageClass::kFalseNegative);
}

TEST(ImageClass, AnyDetectionIsTruePositive) {
  const std::vector<Detection> one{fixture::det(0, 0, 5, 5, 0.79)};
  EXPECT_EQ(classify_image_outcome(one), ImageClass::kTruePositive);
  const std::vector<Detection> three{fixture::det(0, 0, 5, 5, 0.1), fixture::det(1, 1, 2, 2, 0.5),
                                     fixture::det(3, 3, 9, 9, 0.99)};
  EXPECT_EQ(classify_image_outcome(three), ImageClass::kTruePositive);
}

TEST(ImageClass, StringRoundTrip) {
  for (auto c : {ImageClass::kTruePositive, ImageClass::kFalseNegative}) {
    EXPECT_EQ(image_class_from_string(to_string(c)), c);
  }
  EXPECT_THROW(image_class_from_string("maybe"), std::invalid_argument);
}

TEST(Detection, ValidationRejectsBadConfidenceAndClass) {
  EXPECT_NO_THROW(validate_detection(fixture::det(0, 0, 1, 1, 0.5)));
  EXPECT_THROW(validate_detection(fixture::det(0, 0, 1, 1, 1.5)), std::invalid_argument);
  EXPECT_THROW(validate_detection(fixture::det(0, 0, 1, 1, -0.1)), std::invalid_argument);
  EXPECT_THROW(validate_detection(fixture::det(0, 0, 0, 1, 0.5)), std::invalid_argument);
  EXPECT_THROW(validate_detection(fixture::det(0, 0, 1, 1, 0.5, 0)), std::invalid_argument);
}

TEST(Raster, RejectsEmptyDimensions) {
  EXPECT_THROW(Image(0, 5), std::invalid_argument);
  const Image img(3, 2, 7);
  EXPECT_EQ(img.data().size(), 18u);
  EXPECT_EQ(img.at(2, 1, 2), 7);
}
