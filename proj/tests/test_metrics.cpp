#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "emev/errors.hpp"
#include "emev/metrics.hpp"
#include "emev/rng.hpp"

using namespace emev;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed) {
    Tensor t = Tensor::zeros(std::move(shape));
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("nmse: perfect reconstruction and zero estimate") {
    Tensor x = random_tensor({2, 3}, 1);
    CHECK(nmse_linear(x, x) == 0.0);
    Nmse perfect = nmse_from_linear(nmse_linear(x, x));
    CHECK(perfect.perfect);

    Tensor zero = Tensor::zeros({2, 3});
    Nmse n = nmse_from_linear(nmse_linear(x, zero));
    CHECK_FALSE(n.perfect);
    CHECK(n.db == doctest::Approx(0.0).epsilon(1e-9));  // ratio 1 -> 0 dB
}

TEST_CASE("nmse: constructed -20 dB case") {
    // x_hat = x + 0.1*x scaled so error energy is 1% of reference energy.
    Tensor x({4}, {1.0f, 2.0f, -3.0f, 0.5f});
    Tensor x_hat = x;
    double ref = 0.0;
    for (float v : x.data) ref += static_cast<double>(v) * v;
    // put the whole error on one entry: e^2 = 0.01 * ref
    double e = std::sqrt(0.01 * ref);
    x_hat.data[0] += static_cast<float>(e);
    double ratio = nmse_linear(x, x_hat);
    Nmse n = nmse_from_linear(ratio);
    // f32 rounding of the perturbed entry bounds the tolerance
    CHECK(n.db == doctest::Approx(-20.0).epsilon(1e-4));
}

TEST_CASE("nmse guards: shape mismatch and zero reference") {
    Tensor a = Tensor::zeros({2, 2});
    Tensor b = Tensor::zeros({4});
    CHECK_THROWS_AS(nmse_linear(a, b), DimensionError);
    Tensor z = Tensor::zeros({2, 2});
    Tensor y = random_tensor({2, 2}, 2);
    CHECK_THROWS_AS(nmse_linear(z, y), NumericError);
}

TEST_CASE("cosine similarity of V is invariant to per-column phase and scale") {
    Tensor x = random_tensor({2, 3, 3, 2}, 3);
    CHECK(cosine_similarity_v(x, x) == doctest::Approx(1.0).epsilon(1e-6));

    // rotate every column of x_hat by a distinct phase and scale it
    Tensor x_hat = x;
    for (int rb = 0; rb < 2; ++rb)
        for (int c = 0; c < 3; ++c) {
            std::complex<double> w = std::polar(0.5 + 0.25 * c, 0.7 * rb + 0.3 * c);
            for (int r = 0; r < 3; ++r) {
                size_t base = static_cast<size_t>(((rb * 3 + r) * 3 + c) * 2);
                std::complex<double> v(x.data[base], x.data[base + 1]);
                std::complex<double> rot = v * w;
                x_hat.data[base] = static_cast<float>(rot.real());
                x_hat.data[base + 1] = static_cast<float>(rot.imag());
            }
        }
    CHECK(cosine_similarity_v(x, x_hat) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("cosine similarity of orthogonal columns is zero") {
    Tensor x = Tensor::zeros({1, 2, 1, 2});
    Tensor y = Tensor::zeros({1, 2, 1, 2});
    x.data = {1.0f, 0.0f, 0.0f, 0.0f};  // e1
    y.data = {0.0f, 0.0f, 1.0f, 0.0f};  // e2
    CHECK(cosine_similarity_v(x, y) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity: zero columns are skipped but counted") {
    Tensor x = Tensor::zeros({1, 2, 2, 2});
    Tensor y = Tensor::zeros({1, 2, 2, 2});
    // column 0 identical, column 1 zero in both
    x.data[0] = 1.0f;
    y.data[0] = 1.0f;
    CHECK(cosine_similarity_v(x, y) == doctest::Approx(0.5).epsilon(1e-12));
    Tensor z = Tensor::zeros({1, 2, 2, 2});
    CHECK_THROWS_AS(cosine_similarity_v(z, z), NumericError);
}

TEST_CASE("cosine similarity of S matches a hand value") {
    Tensor s({2, 2}, {1.0f, 0.0f, 3.0f, 4.0f});
    Tensor s_hat({2, 2}, {0.0f, 1.0f, 3.0f, 4.0f});
    // rb0: orthogonal (0), rb1: identical (1) -> mean 0.5
    CHECK(cosine_similarity_s(s, s_hat) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(cosine_similarity_s(s, s) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("report writers are deterministic and honor the perfect flag") {
    EvalRow r1;
    r1.profile = "cdl-a-like";
    r1.model_kind = "N_sp";
    r1.l_eps = 16;
    r1.beta_h = 16.0;
    r1.beta_emev = 256.0;
    r1.nmse_v_db = -12.345678;
    r1.nmse_s_db = 0.0;
    r1.nmse_s_perfect = true;
    r1.rho_v = 0.987654;
    r1.rho_s = 0.999999;
    r1.n_samples = 150;
    std::string base = (std::filesystem::temp_directory_path() / "emev_report").string();
    std::string csv1 = base + "_1.csv", csv2 = base + "_2.csv", json1 = base + ".json";
    write_report_csv(csv1, "emev 0.1.0 eval test", {r1});
    write_report_csv(csv2, "emev 0.1.0 eval test", {r1});
    std::string text = slurp(csv1);
    CHECK(text == slurp(csv2));
    CHECK(text.rfind("# emev 0.1.0 eval test", 0) == 0);
    CHECK(text.find("-inf") != std::string::npos);
    CHECK(text.find("-12.345678") != std::string::npos);
    CHECK(text.find("N_sp") != std::string::npos);

    write_report_json(json1, "emev 0.1.0 eval test", {r1});
    std::string js = slurp(json1);
    CHECK(js.find("\"nmse_s_perfect\"") != std::string::npos);
    CHECK(js.find("cdl-a-like") != std::string::npos);
    std::remove(csv1.c_str());
    std::remove(csv2.c_str());
    std::remove(json1.c_str());
}
