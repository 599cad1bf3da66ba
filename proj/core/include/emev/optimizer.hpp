#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "emev/autodiff.hpp"

namespace emev {

// Adam with bias correction. Moments are registered per parameter up front;
// stepping an unregistered parameter is a configuration error.
class AdamState {
   public:
    explicit AdamState(double lr, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8);

    void register_params(const std::vector<Parameter*>& params);

    // Applies one update to every parameter and zeroes its gradient.
    void step(const std::vector<Parameter*>& params);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    int64_t step_count() const { return step_; }
    void set_step_count(int64_t t) { step_ = t; }

    struct Moments {
        Tensor m;
        Tensor v;
    };
    Moments* moments_for(Parameter* p);

   private:
    double lr_, beta1_, beta2_, eps_;
    int64_t step_ = 0;
    std::unordered_map<Parameter*, Moments> moments_;
};

}  // namespace emev
