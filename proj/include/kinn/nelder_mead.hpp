#ifndef KINN_NELDER_MEAD_HPP
#define KINN_NELDER_MEAD_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace kinn {

struct NelderMeadOptions {
    std::size_t max_iterations = 2000;
    /// Converged when the simplex's best-worst objective spread drops below this.
    double tolerance = 1e-8;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Best objective seen after each iteration; non-increasing by construction.
    std::vector<double> best_trace;
};

/**
 * Derivative-free simplex minimization (reflection 1, expansion 2,
 * contraction 0.5, shrink 0.5). The objective may return +inf to mark
 * infeasible points.
 */
NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& objective,
    std::vector<double> start, const NelderMeadOptions& options = {});

} // namespace kinn

#endif // KINN_NELDER_MEAD_HPP
