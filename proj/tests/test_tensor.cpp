#include <doctest.h>

#include <limits>

#include "emev/errors.hpp"
#include "emev/tensor.hpp"

using namespace emev;

TEST_CASE("tensor construction validates shape against data size") {
    CHECK_NOTHROW(Tensor({2, 3}, std::vector<float>(6, 1.0f)));
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5, 1.0f)), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 3}, std::vector<float>{}), DimensionError);
    CHECK_THROWS_AS(Tensor({-1}, std::vector<float>{}), DimensionError);
}

TEST_CASE("zeros/full/fill") {
    Tensor z = Tensor::zeros({2, 2});
    for (float v : z.data) CHECK(v == 0.0f);
    Tensor f = Tensor::full({3}, 2.5f);
    for (float v : f.data) CHECK(v == 2.5f);
    f.fill(-1.0f);
    for (float v : f.data) CHECK(v == -1.0f);
}

TEST_CASE("shape helpers") {
    CHECK(shape_product({2, 3, 4}) == 24);
    CHECK(shape_product({}) == 1);
    Tensor t = Tensor::zeros({4, 8, 2});
    CHECK(t.rank() == 3);
    CHECK(t.size() == 64);
    CHECK(t.shape_str() == shape_to_string({4, 8, 2}));
}

TEST_CASE("all_finite flags NaN and inf") {
    Tensor t = Tensor::zeros({2});
    CHECK(t.all_finite());
    t.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    t.data[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
}
