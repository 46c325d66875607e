#ifndef DCP_MC_STATS_HPP
#define DCP_MC_STATS_HPP

#include <algorithm>
#include <cmath>

namespace dcp {

// Monte Carlo summary of a discounted cost functional.  mean/mean_rewritten
// differ only in the idle-cost form (per-increment discounting vs the
// rewritten running-integral form); joint_se is the standard error of the
// per-path difference between the two totals.
struct CostEstimate {
    long n_paths = 0;
    double mean = 0.0;
    double standard_error = 0.0;
    double ci_half_width = 0.0;  // 1.96 * standard_error
    double tail_bound = 0.0;     // e^{-alpha T} (C(0)/alpha + p * rate_bound)
    double mean_rewritten = 0.0;
    double joint_se = 0.0;
    double mean_control = 0.0;
    double mean_idle = 0.0;
    double mean_local_time = 0.0;
    double mean_local_time_sq = 0.0;
    double clip_rate = 0.0;  // fraction of policy evaluations that were clipped/clamped
};

// Fixed-order accumulator for per-path statistics.  Workers fill one each
// over a contiguous seed block; blocks merge in block order so results are
// reproducible for a fixed worker count.
struct path_accumulator {
    long n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    double sum_diff = 0.0;  // direct total - rewritten total
    double sum_diff_sq = 0.0;
    double sum_control = 0.0;
    double sum_idle = 0.0;
    double sum_l = 0.0;
    double sum_l_sq = 0.0;
    double clip_events = 0.0;
    double clip_chances = 0.0;

    void add(double total, double rewritten_total, double control, double idle, double l,
             double clipped, double chances) {
        ++n;
        sum += total;
        sum_sq += total * total;
        const double d = total - rewritten_total;
        sum_diff += d;
        sum_diff_sq += d * d;
        sum_control += control;
        sum_idle += idle;
        sum_l += l;
        sum_l_sq += l * l;
        clip_events += clipped;
        clip_chances += chances;
    }
    void merge(const path_accumulator& o) {
        n += o.n;
        sum += o.sum;
        sum_sq += o.sum_sq;
        sum_diff += o.sum_diff;
        sum_diff_sq += o.sum_diff_sq;
        sum_control += o.sum_control;
        sum_idle += o.sum_idle;
        sum_l += o.sum_l;
        sum_l_sq += o.sum_l_sq;
        clip_events += o.clip_events;
        clip_chances += o.clip_chances;
    }
};

inline double sample_se(long n, double sum, double sum_sq) {
    if (n < 2) return 0.0;
    const double mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
}

inline CostEstimate finalize_estimate(const path_accumulator& acc, double alpha, double horizon,
                                      double cost_at_zero, double p, double rate_bound) {
    CostEstimate e;
    e.n_paths = acc.n;
    const double inv_n = acc.n > 0 ? 1.0 / static_cast<double>(acc.n) : 0.0;
    e.mean = acc.sum * inv_n;
    e.standard_error = sample_se(acc.n, acc.sum, acc.sum_sq);
    e.ci_half_width = 1.96 * e.standard_error;
    e.tail_bound = std::exp(-alpha * horizon) * (cost_at_zero / alpha + p * rate_bound);
    e.mean_rewritten = e.mean - acc.sum_diff * inv_n;
    e.joint_se = sample_se(acc.n, acc.sum_diff, acc.sum_diff_sq);
    e.mean_control = acc.sum_control * inv_n;
    e.mean_idle = acc.sum_idle * inv_n;
    e.mean_local_time = acc.sum_l * inv_n;
    e.mean_local_time_sq = acc.sum_l_sq * inv_n;
    e.clip_rate = acc.clip_chances > 0.0 ? acc.clip_events / acc.clip_chances : 0.0;
    return e;
}

}  // namespace dcp

#endif
