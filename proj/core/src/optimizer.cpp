#include "emev/optimizer.hpp"

#include <cmath>

#include "emev/errors.hpp"

namespace emev {

AdamState::AdamState(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamState::register_params(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        if (moments_.count(p)) continue;
        moments_.emplace(p, Moments{Tensor::zeros(p->value.shape), Tensor::zeros(p->value.shape)});
    }
}

AdamState::Moments* AdamState::moments_for(Parameter* p) {
    auto it = moments_.find(p);
    return it == moments_.end() ? nullptr : &it->second;
}

void AdamState::step(const std::vector<Parameter*>& params) {
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (Parameter* p : params) {
        auto it = moments_.find(p);
        if (it == moments_.end()) {
            throw ConfigError("adam: parameter '" + p->name + "' has no optimizer state");
        }
        Moments& mo = it->second;
        for (int64_t i = 0; i < p->value.size(); ++i) {
            size_t si = static_cast<size_t>(i);
            double g = static_cast<double>(p->grad.data[si]);
            double m = beta1_ * static_cast<double>(mo.m.data[si]) + (1.0 - beta1_) * g;
            double v = beta2_ * static_cast<double>(mo.v.data[si]) + (1.0 - beta2_) * g * g;
            mo.m.data[si] = static_cast<float>(m);
            mo.v.data[si] = static_cast<float>(v);
            double mhat = m / bc1;
            double vhat = v / bc2;
            p->value.data[si] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
        p->zero_grad();
    }
}

}  // namespace emev
