#include <doctest.h>

#include <cmath>

#include "emev/errors.hpp"
#include "emev/optimizer.hpp"

using namespace emev;

TEST_CASE("adam single step matches the closed form") {
    Parameter p("p", Tensor({1}, {1.0f}));
    p.grad.data[0] = 0.5f;
    AdamState opt(1e-3);
    opt.register_params({&p});
    opt.step({&p});
    // m = 0.1 g, v = 0.001 g^2; bias-corrected: mhat = g, vhat = g^2.
    double g = 0.5;
    double want = 1.0 - 1e-3 * g / (std::sqrt(g * g) + 1e-8);
    CHECK(p.value.data[0] == doctest::Approx(want).epsilon(1e-6));
    CHECK(p.grad.data[0] == 0.0f);  // grads zeroed after the step
    CHECK(opt.step_count() == 1);
}

TEST_CASE("two steps match a double-precision replica") {
    Parameter p("p", Tensor({1}, {2.0f}));
    AdamState opt(0.01);
    opt.register_params({&p});
    float x = 2.0f, m = 0.0f, v = 0.0f;
    for (int t = 1; t <= 2; ++t) {
        float g = 2.0f * x;  // d/dx x^2
        p.grad.data[0] = g;
        // replica with the same f32 storage / double math as the optimizer
        double gd = static_cast<double>(g);
        m = static_cast<float>(0.9 * static_cast<double>(m) + 0.1 * gd);
        v = static_cast<float>(0.999 * static_cast<double>(v) + 0.001 * gd * gd);
        double mhat = static_cast<double>(m) / (1.0 - std::pow(0.9, t));
        double vhat = static_cast<double>(v) / (1.0 - std::pow(0.999, t));
        x -= static_cast<float>(0.01 * mhat / (std::sqrt(vhat) + 1e-8));
        opt.step({&p});
        CHECK(p.value.data[0] == x);
    }
}

TEST_CASE("stepping an unregistered parameter is a configuration error") {
    Parameter p("p", Tensor({1}, {1.0f}));
    AdamState opt(1e-3);
    CHECK_THROWS_AS(opt.step({&p}), ConfigError);
}

TEST_CASE("learning-rate setter is exact") {
    AdamState opt(1e-3);
    opt.set_learning_rate(opt.learning_rate() * 0.7);
    CHECK(opt.learning_rate() == 0.7e-3);
}
