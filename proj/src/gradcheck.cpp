#include "dnahnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dnahnet::ad {

GradCheckResult finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                                  const GradCheckOptions& options) {
    for (auto& t : inputs) t.zero_grad();
    backward(f());

    GradCheckResult result;
    std::mt19937_64 rng(options.seed);
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = inputs[ti];
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        std::vector<std::size_t> coords(t.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (coords.size() > options.coords_per_tensor) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.coords_per_tensor);
        }
        auto values = t.mutable_data();
        NoGradGuard no_grad;
        for (auto i : coords) {
            const double saved = values[i];
            values[i] = saved + options.eps;
            const double up = f().item();
            values[i] = saved - options.eps;
            const double down = f().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * options.eps);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
            ++result.coords_checked;
            if (err >= result.max_rel_error) {
                result.max_rel_error = err;
                result.worst = std::to_string(ti) + "#" + std::to_string(i);
            }
        }
    }
    return result;
}

}  // namespace dnahnet::ad
