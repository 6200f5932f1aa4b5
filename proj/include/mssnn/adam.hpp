#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mssnn/params.hpp"

namespace mssnn {

template <typename T>
struct AdamConfig {
    T lr = T(0.0002);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

// Adam with bias correction. Moment buffers parallel the parameter store's
// registration order; the step counter advances once per apply.
template <typename T>
class AdamState {
  public:
    AdamState() = default;

    AdamState(AdamConfig<T> cfg, const ParamStore<T>& params) : cfg_(cfg) {
        for (const auto& e : params.entries()) {
            m_.push_back(Array<T>::zeros(e.value.shape));
            v_.push_back(Array<T>::zeros(e.value.shape));
        }
    }

    // grads[i] pairs with params.entries()[i]; nullptr means missing.
    void step(ParamStore<T>& params, const std::vector<const Array<T>*>& grads) {
        auto& entries = params.entries();
        if (grads.size() != entries.size() || m_.size() != entries.size())
            throw ContractError("adam: parameter/gradient count mismatch");
        ++step_;
        const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(step_));
        const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(step_));
        for (std::size_t p = 0; p < entries.size(); ++p) {
            if (!grads[p])
                throw ContractError("adam: missing gradient for parameter " + entries[p].name);
            Array<T>& w = entries[p].value;
            const Array<T>& g = *grads[p];
            require_same_shape(w, g, "adam(" + entries[p].name + ")");
            Array<T>& m = m_[p];
            Array<T>& v = v_[p];
            for (std::size_t i = 0; i < w.data.size(); ++i) {
                m.data[i] = cfg_.beta1 * m.data[i] + (T(1) - cfg_.beta1) * g.data[i];
                v.data[i] = cfg_.beta2 * v.data[i] + (T(1) - cfg_.beta2) * g.data[i] * g.data[i];
                const T mhat = m.data[i] / bc1;
                const T vhat = v.data[i] / bc2;
                w.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    const AdamConfig<T>& config() const { return cfg_; }
    std::int64_t step_count() const { return step_; }
    std::vector<Array<T>>& m() { return m_; }
    std::vector<Array<T>>& v() { return v_; }
    const std::vector<Array<T>>& m() const { return m_; }
    const std::vector<Array<T>>& v() const { return v_; }
    void set_step_count(std::int64_t s) { step_ = s; }

  private:
    AdamConfig<T> cfg_;
    std::vector<Array<T>> m_, v_;
    std::int64_t step_ = 0;
};

}  // namespace mssnn
