#include "kinn/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kinn {

namespace {

struct Vertex {
    std::vector<double> x;
    double f;
};

} // namespace

NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& objective,
    std::vector<double> start, const NelderMeadOptions& options) {
    const std::size_t n = start.size();
    NelderMeadResult result;
    if (n == 0) {
        result.x = start;
        result.value = objective(start);
        result.converged = true;
        result.best_trace.push_back(result.value);
        return result;
    }

    // Initial simplex: start plus one perturbed vertex per coordinate.
    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    simplex.push_back({start, objective(start)});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v = start;
        v[i] += (v[i] != 0.0) ? 0.05 * std::abs(v[i]) + 1e-4 : 0.1;
        simplex.push_back({v, objective(v)});
    }

    auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    std::sort(simplex.begin(), simplex.end(), by_value);
    result.best_trace.push_back(simplex.front().f);

    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    std::vector<double> centroid(n), trial(n);

    std::size_t iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const double spread = simplex.back().f - simplex.front().f;
        if (std::isfinite(spread) && spread < options.tolerance) {
            result.converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i].x[j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        const Vertex& worst = simplex.back();
        for (std::size_t j = 0; j < n; ++j)
            trial[j] = centroid[j] + alpha * (centroid[j] - worst.x[j]);
        const double f_reflect = objective(trial);

        if (f_reflect < simplex.front().f) {
            std::vector<double> expanded(n);
            for (std::size_t j = 0; j < n; ++j)
                expanded[j] = centroid[j] + gamma * (trial[j] - centroid[j]);
            const double f_expand = objective(expanded);
            if (f_expand < f_reflect)
                simplex.back() = {expanded, f_expand};
            else
                simplex.back() = {trial, f_reflect};
        } else if (f_reflect < simplex[n - 1].f) {
            simplex.back() = {trial, f_reflect};
        } else {
            // Contract toward the better of worst/reflected.
            const bool outside = f_reflect < worst.f;
            const std::vector<double>& anchor = outside ? trial : worst.x;
            std::vector<double> contracted(n);
            for (std::size_t j = 0; j < n; ++j)
                contracted[j] = centroid[j] + rho * (anchor[j] - centroid[j]);
            const double f_contract = objective(contracted);
            if (f_contract < std::min(f_reflect, worst.f)) {
                simplex.back() = {contracted, f_contract};
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i].x[j] = simplex[0].x[j] +
                                          sigma * (simplex[i].x[j] - simplex[0].x[j]);
                    simplex[i].f = objective(simplex[i].x);
                }
            }
        }

        std::sort(simplex.begin(), simplex.end(), by_value);
        result.best_trace.push_back(simplex.front().f);
    }

    result.x = simplex.front().x;
    result.value = simplex.front().f;
    result.iterations = iter;
    return result;
}

} // namespace kinn
