#pragma once

#include "packent/covering.hpp"
#include "packent/measures.hpp"

namespace packent {

// ---------------------------------------------------------------------------
// The (T, T^-1) skew product over {1,-1}^Z, with F_n = [0, n-1] and the
// metric d(x,y) = 2^{-min{|i| : x_i != y_i}} throughout this section.
// ---------------------------------------------------------------------------

/// Cocycle, running envelopes and range of the walk driven by a +-1 scenery
/// direction sequence: S^n(x,y) = (T^{omega(y,n)} x, T^n y).
struct WalkRecord {
    std::vector<std::int64_t> omega;        // omega(y, n), 0 <= n <= L
    std::vector<std::int64_t> running_max;  // M(y, n)
    std::vector<std::int64_t> running_min;  // m(y, n)
    std::vector<std::int64_t> range;        // R(n) = M - m

    std::size_t steps() const { return omega.size() - 1; }
};

inline WalkRecord tt_walk(std::span<const int> y, std::size_t L) {
    if (L > y.size()) throw std::invalid_argument("tt_walk: L exceeds sequence length");
    WalkRecord rec;
    rec.omega.reserve(L + 1);
    rec.running_max.reserve(L + 1);
    rec.running_min.reserve(L + 1);
    rec.range.reserve(L + 1);
    std::int64_t w = 0, hi = 0, lo = 0;
    rec.omega.push_back(0);
    rec.running_max.push_back(0);
    rec.running_min.push_back(0);
    rec.range.push_back(0);
    for (std::size_t i = 0; i < L; ++i) {
        if (y[i] != 1 && y[i] != -1)
            throw std::domain_error("tt_walk: scenery symbols must be +-1");
        w += y[i];
        hi = std::max(hi, w);
        lo = std::min(lo, w);
        rec.omega.push_back(w);
        rec.running_max.push_back(hi);
        rec.running_min.push_back(lo);
        rec.range.push_back(hi - lo);
    }
    // invariants of the record; violations are implementation bugs
    for (std::size_t n = 0; n < L; ++n) {
        const auto d = rec.range[n + 1] - rec.range[n];
        if (std::abs(rec.omega[n + 1] - rec.omega[n]) != 1 || d < 0 || d > 1)
            throw CheckFailure("tt_walk: record invariants violated");
    }
    return rec;
}

struct FiberEntropyReport {
    double packing = 0.0;  // tail limsup of R(n)/n, times log 2
    double bowen = 0.0;    // tail liminf counterpart
    double tail_limsup_ratio = 0.0;
    double tail_liminf_ratio = 0.0;
    bool regular = false;  // |packing - bowen| < tol
    double tolerance = 0.0;
};

/// Prop-5.11 estimators for the fiber E_y: packing entropy from the tail
/// limsup of R(n)/n and Bowen entropy from the tail liminf, both in units of
/// h_top(A^Z, T) = log|A| (log 2 unless extrapolating to a larger alphabet).
inline FiberEntropyReport tt_fiber_entropies(std::span<const int> y, std::size_t L,
                                             double tail_fraction = 1.0 / 3.0,
                                             double tol = 0.01, int alphabet = 2) {
    if (L < 100) throw std::invalid_argument("tt_fiber_entropies: L >= 100 required");
    WalkRecord rec = tt_walk(y, L);
    const auto first = static_cast<std::size_t>(
        std::max<std::int64_t>(1, std::llround((1.0 - tail_fraction) * static_cast<double>(L))));
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (std::size_t n = first; n <= L; ++n) {
        const double r = static_cast<double>(rec.range[n]) / static_cast<double>(n);
        hi = std::max(hi, r);
        lo = std::min(lo, r);
    }
    FiberEntropyReport rep;
    rep.tail_limsup_ratio = hi;
    rep.tail_liminf_ratio = lo;
    const double h_full = std::log(static_cast<double>(alphabet));
    rep.packing = hi * h_full;
    rep.bowen = lo * h_full;
    rep.tolerance = tol;
    rep.regular = std::abs(rep.packing - rep.bowen) < tol;
    return rep;
}

/// Brute-force check of the fiber Bowen-ball identity: the n-step rho-ball
/// around (x,y) intersected with E_y equals the [m(y,n-1), M(y,n-1)]-window
/// Bowen ball of x in the first coordinate.  Both sides are enumerated over
/// all patterns on a window containing [m-k-1, M+k+1].
inline bool tt_fiber_ball_check(const Configuration& x, std::span<const int> y, int n,
                                double eps) {
    if (n < 1 || n > 12) throw ResourceError("tt_fiber_ball_check: n must be in [1, 12]");
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps in (0,1]");
    // d < eps with eps in (2^{-(j+1)}, 2^{-j}] means agreement on |i| <= j
    int k = 0;
    while (eps <= std::pow(2.0, -(k + 1))) ++k;

    WalkRecord rec = tt_walk(y, static_cast<std::size_t>(n));
    const std::int64_t m = rec.running_min[n - 1], M = rec.running_max[n - 1];
    const std::int64_t wlo = m - k - 1, whi = M + k + 1;
    const auto width = static_cast<std::size_t>(whi - wlo + 1);
    if (width > 22) throw ResourceError("tt_fiber_ball_check: enumeration window too wide");

    const FiniteSubset window = z_interval(wlo, whi);
    const WalkMetric d(static_cast<int>(width) + 2);
    const FiniteSubset interval = z_interval(m, M);

    for (std::size_t bits = 0; bits < (std::size_t(1) << width); ++bits) {
        std::vector<Symbol> pat(width);
        for (std::size_t i = 0; i < width; ++i) pat[i] = (bits >> i) & 1;
        Configuration cand(2, window, std::move(pat), x.default_symbol());

        // left side: simulate the skew product step by step
        bool lhs = true;
        for (int i = 0; i < n && lhs; ++i) {
            const GroupElement shift = make_z(rec.omega[i]);
            lhs = d(cand.shifted(shift), x.shifted(shift)) < eps;
        }
        // right side: Bowen ball over the envelope interval
        bool rhs = true;
        for (const auto& g : interval) {
            if (!(d(cand.shifted(g), x.shifted(g)) < eps)) {
                rhs = false;
                break;
            }
        }
        if (lhs != rhs) return false;
    }
    return true;
}

struct RangeStatistics {
    std::size_t trials = 0;
    std::size_t length = 0;
    double mean_ratio = 0.0;  // mean of R(L)/L
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double stddev = 0.0;
    std::vector<double> ratios;
};

/// Monte Carlo over i.i.d. uniform +-1 sceneries: the empirical distribution
/// of R(L)/L.  The sqrt(L) range scaling makes typical fiber entropies
/// vanish.  `inject` substitutes a fixed scenery (degenerate one-trial use).
inline RangeStatistics srw_range_statistics(std::size_t trials, std::size_t L,
                                            std::uint64_t seed,
                                            const std::vector<int>* inject = nullptr) {
    if (trials < 1) throw std::invalid_argument("srw_range_statistics: trials >= 1");
    RangeStatistics st;
    st.trials = trials;
    st.length = L;
    st.ratios.reserve(trials);
    CounterRng root(seed, 0x73727721u);
    std::vector<int> y(L);
    for (std::size_t t = 0; t < trials; ++t) {
        if (inject) {
            y = *inject;
        } else {
            CounterRng rng = root.split(t);
            for (std::size_t i = 0; i < L; ++i) y[i] = (rng.at(i) & 1) ? 1 : -1;
        }
        WalkRecord rec = tt_walk(y, L);
        st.ratios.push_back(static_cast<double>(rec.range[L]) / static_cast<double>(L));
    }
    st.min_ratio = *std::min_element(st.ratios.begin(), st.ratios.end());
    st.max_ratio = *std::max_element(st.ratios.begin(), st.ratios.end());
    double mean = 0.0;
    for (double r : st.ratios) mean += r;
    mean /= static_cast<double>(trials);
    st.mean_ratio = mean;
    double var = 0.0;
    for (double r : st.ratios) var += (r - mean) * (r - mean);
    st.stddev = trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1)) : 0.0;
    return st;
}

// ---------------------------------------------------------------------------
// X_{alpha,beta} oracle
// ---------------------------------------------------------------------------

struct XabParams {
    std::vector<int> N_schedule{1, 2, 4};
    int eps_index = 0;
    double bisection_tol = 1e-6;
    double tail_fraction = 1.0 / 3.0;
    double match_tol = 0.05;  // |estimate - reference| budget in nats
    std::size_t node_budget = kDefaultNodeBudget;
    int variational_samples = 100;
    std::uint64_t seed = 7;
};

struct XabReport {
    DensityTrace density;
    bool counts_exact = false;  // level sizes equal 2^{|H n F_n|} at every level
    ChainReport chain;
    double bowen_estimate = 0.0, packing_estimate = 0.0, capacity_estimate = 0.0;
    /// Finite-scale references: observed density inf/sup over the estimator
    /// window [N_last, depth], times log 2.
    double reference_inf = 0.0, reference_sup = 0.0;
    bool bowen_matches = false, packing_matches = false, capacity_matches = false;
    double packing_bowen_gap = 0.0;
    VariationalReport variational;  // against the uniform-on-H measure
    bool pass = false;
};

/// Builds the X_{alpha,beta} tree, verifies the exact count identity
/// #E_n = 2^{|H n F_n|}, runs the entropy chain, compares against the
/// observed-density references, and closes the loop with the variational
/// check against the measure that weights each admissible pattern equally.
inline XabReport xab_oracle(const DensitySet& H, int depth, const FolnerSequence& seq,
                            const XabParams& params = {}) {
    XabReport rep;
    CylinderTree tree = build_tree(SubsetSpec{xab_spec(H)}, depth, seq, 2, params.node_budget);

    rep.density = density_trace(H, seq, depth, params.tail_fraction);

    rep.counts_exact = true;
    for (int n = 0; n <= depth; ++n) {
        std::size_t in_h = 0;
        for (const auto& g : seq.set(n))
            if (H.contains(g)) ++in_h;
        if (tree.level_size(n) != (std::size_t(1) << in_h)) rep.counts_exact = false;
    }

    const int N_last = params.N_schedule.back();
    ChainParams cp;
    cp.start_index = N_last;
    cp.depth = depth;
    cp.eps_index = params.eps_index;
    cp.tolerance = params.bisection_tol;
    cp.tail_fraction = params.tail_fraction;
    rep.chain = entropy_chain_check(tree, cp);

    rep.bowen_estimate =
        bowen_entropy_estimate(tree, params.N_schedule, depth, params.eps_index,
                               params.bisection_tol)
            .value;
    rep.packing_estimate =
        packing_entropy_estimate(tree, params.N_schedule, depth, params.eps_index,
                                 params.bisection_tol)
            .value;
    rep.capacity_estimate = rep.chain.capacity;

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < rep.density.indices.size(); ++i) {
        if (rep.density.indices[i] < N_last) continue;
        lo = std::min(lo, rep.density.ratios[i]);
        hi = std::max(hi, rep.density.ratios[i]);
    }
    rep.reference_inf = lo * std::log(2.0);
    rep.reference_sup = hi * std::log(2.0);
    rep.bowen_matches = std::abs(rep.bowen_estimate - rep.reference_inf) <= params.match_tol;
    rep.packing_matches = std::abs(rep.packing_estimate - rep.reference_sup) <= params.match_tol;
    rep.capacity_matches =
        std::abs(rep.capacity_estimate - rep.reference_sup) <= params.match_tol;
    rep.packing_bowen_gap = rep.packing_estimate - rep.bowen_estimate;

    VariationalParams vp;
    vp.N_schedule = params.N_schedule;
    vp.depth = depth;
    vp.eps_index = params.eps_index;
    vp.bisection_tol = params.bisection_tol;
    vp.tail_fraction = params.tail_fraction;
    vp.sample_count = params.variational_samples;
    vp.seed = params.seed;
    rep.variational = variational_gap(tree, {CylinderMeasure::xab(H)}, vp);

    rep.pass = rep.counts_exact && rep.chain.ok && rep.bowen_matches && rep.packing_matches &&
               rep.capacity_matches && rep.variational.lower_bound_ok;
    return rep;
}

// ---------------------------------------------------------------------------
// Factor maps between full shifts on Z
// ---------------------------------------------------------------------------

/// Sliding block code with window [-radius, radius].  The rule receives the
/// absolute position only so the equivariance test can catch rules that
/// illegally depend on it.
struct SlidingBlockCode {
    int src_alphabet = 2;
    int img_alphabet = 2;
    int radius = 0;
    std::function<Symbol(std::int64_t, std::span<const Symbol>)> rule;
};

inline SlidingBlockCode one_block_code(int src_alphabet, int img_alphabet,
                                       std::function<Symbol(Symbol)> map) {
    return SlidingBlockCode{src_alphabet, img_alphabet, 0,
                            [map = std::move(map)](std::int64_t, std::span<const Symbol> w) {
                                return map(w[0]);
                            }};
}

struct FactorParams {
    std::vector<int> N_schedule{1, 2};
    double bisection_tol = 1e-6;
    double check_tol = 1e-4;
    int fiber_samples = 50;
    std::uint64_t seed = 7;
    std::size_t node_budget = kDefaultNodeBudget;
};

struct FactorReport {
    double image_packing = 0.0;
    double source_packing = 0.0;
    double fiber_capacity_sup = 0.0;  // estimated over sampled fibers
    bool left_inequality_ok = false;   // h^P(pi E) <= h^P(E)
    bool right_inequality_ok = false;  // h^P(E) <= h^P(pi E) + sup fiber h^UC
    double right_slack = 0.0;
    bool pass = false;
};

namespace detail {

inline Symbol apply_code_at(const SlidingBlockCode& code, std::span<const Symbol> src_pattern,
                            std::int64_t window_lo, std::int64_t pos) {
    const int r = code.radius;
    std::vector<Symbol> word(static_cast<std::size_t>(2 * r + 1));
    for (int t = -r; t <= r; ++t)
        word[static_cast<std::size_t>(t + r)] =
            src_pattern[static_cast<std::size_t>(pos + t - window_lo)];
    return code.rule(pos, word);
}

/// pi(x)(g) = rule(x|_{[g-r, g+r]}) commutes with the shift iff the rule
/// ignores the absolute position; tested on random configurations.
inline void require_equivariant(const SlidingBlockCode& code, std::uint64_t seed) {
    CounterRng rng(seed, 0xfac70f);
    const int span = 6 + code.radius;
    for (int trial = 0; trial < 32; ++trial) {
        CounterRng r = rng.split(trial);
        std::vector<Symbol> pat(static_cast<std::size_t>(2 * span + 1));
        for (auto& s : pat)
            s = static_cast<Symbol>(r.next_below(static_cast<std::uint64_t>(code.src_alphabet)));
        const auto g = static_cast<std::int64_t>(r.next_below(5)) - 2;
        const auto p = static_cast<std::int64_t>(r.next_below(3)) - 1;
        if (std::abs(p + g) + code.radius > span) continue;
        // (pi(gx))_p = (g pi(x))_p = pi(x)_{p+g}
        const Symbol via_shifted = code.rule(p, [&] {
            std::vector<Symbol> w(static_cast<std::size_t>(2 * code.radius + 1));
            for (int t = -code.radius; t <= code.radius; ++t)
                w[static_cast<std::size_t>(t + code.radius)] =
                    pat[static_cast<std::size_t>(p + g + t + span)];
            return w;
        }());
        const Symbol direct = apply_code_at(code, pat, -span, p + g);
        if (via_shifted != direct)
            throw std::domain_error("factor_inequality_check: code is not shift-equivariant");
    }
}

}  // namespace detail

/// Thm-1.2 instance checker: h^P(pi E) <= h^P(E) <= h^P(pi E) + sup_y
/// h^UC(pi^-1 y).  The fiber sup is estimated over sampled image points plus
/// the all-ones point and a per-coordinate greedy adversary (exact maximizer
/// when the source constraints are per-coordinate).
inline FactorReport factor_inequality_check(const SlidingBlockCode& code,
                                            const CylinderTree& source, int depth,
                                            const FactorParams& params = {}) {
    detail::require_equivariant(code, params.seed);
    const int r = code.radius;
    if (source.depth() < depth + r)
        throw std::invalid_argument("factor_inequality_check: source tree too shallow");
    const auto& seq = source.seq();
    if (seq.group().kind() != GroupKind::zd || seq.group().dim() != 1)
        throw std::invalid_argument("factor_inequality_check: codes live on Z");

    // image tree: level n patterns are the coded level-(n )+r patterns
    std::vector<std::vector<std::vector<Symbol>>> raw(static_cast<std::size_t>(depth) + 1);
    for (int n = 0; n <= depth; ++n) {
        const auto& lv = source.level(n + r);
        const std::int64_t lo = -(n + r);
        for (std::size_t i = 0; i < lv.size(); ++i) {
            auto p = lv.pattern(i);
            std::vector<Symbol> img(static_cast<std::size_t>(2 * n + 1));
            for (std::int64_t pos = -n; pos <= n; ++pos)
                img[static_cast<std::size_t>(pos + n)] = detail::apply_code_at(code, p, lo, pos);
            raw[n].push_back(std::move(img));
        }
    }
    CylinderTree image = CylinderTree::from_levels(seq, code.img_alphabet, std::move(raw),
                                                   params.node_budget);

    FactorReport rep;
    rep.source_packing = packing_entropy_estimate(source, params.N_schedule, depth + r, 0,
                                                  params.bisection_tol)
                             .value;
    rep.image_packing =
        packing_entropy_estimate(image, params.N_schedule, depth, 0, params.bisection_tol).value;

    // fiber counts: distinct source level-(n+r) patterns coding to y|F_n,
    // reduced to their F_n restrictions
    auto fiber_rate = [&](const std::vector<Symbol>& y_full) {
        double best = 0.0;
        for (int n = params.N_schedule.back(); n <= depth; ++n) {
            const auto& lv = source.level(n + r);
            const std::int64_t lo = -(n + r);
            std::unordered_set<std::string> restrictions;
            for (std::size_t i = 0; i < lv.size(); ++i) {
                auto p = lv.pattern(i);
                bool match = true;
                for (std::int64_t pos = -n; pos <= n && match; ++pos)
                    match = detail::apply_code_at(code, p, lo, pos) ==
                            y_full[static_cast<std::size_t>(pos + depth)];
                if (!match) continue;
                restrictions.insert(std::string(p.begin() + r, p.end() - r));
            }
            if (!restrictions.empty())
                best = std::max(best, std::log(static_cast<double>(restrictions.size())) /
                                          static_cast<double>(seq.size(n)));
        }
        return best;
    };

    std::vector<std::vector<Symbol>> probes;
    {
        const std::size_t w = 2 * static_cast<std::size_t>(depth) + 1;
        CounterRng rng(params.seed, 0xf1be5);
        for (int t = 0; t < params.fiber_samples; ++t) {
            CounterRng rr = rng.split(t);
            // sample an image point that is actually hit: code a random leaf
            const auto& lv = source.level(depth + r);
            auto p = lv.pattern(rr.next_below(lv.size()));
            std::vector<Symbol> y(w);
            for (std::int64_t pos = -depth; pos <= depth; ++pos)
                y[static_cast<std::size_t>(pos + depth)] =
                    detail::apply_code_at(code, p, -(depth + r), pos);
            probes.push_back(std::move(y));
        }
        probes.emplace_back(w, static_cast<Symbol>(1 % code.img_alphabet));  // all-ones
        // per-coordinate greedy adversary: maximize preimage choices per site
        const auto& leaf = source.level(depth + r);
        std::vector<std::unordered_set<Symbol>> seen(leaf.window.size());
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            auto p = leaf.pattern(i);
            for (std::size_t j = 0; j < p.size(); ++j) seen[j].insert(p[j]);
        }
        if (r == 0) {
            std::vector<Symbol> adv(w);
            for (std::int64_t pos = -depth; pos <= depth; ++pos) {
                std::vector<int> pulls(static_cast<std::size_t>(code.img_alphabet), 0);
                for (Symbol s : seen[static_cast<std::size_t>(pos + depth + r)]) {
                    std::vector<Symbol> word{s};
                    pulls[code.rule(pos, word)]++;
                }
                int best_b = 0;
                for (int b = 1; b < code.img_alphabet; ++b)
                    if (pulls[b] > pulls[best_b]) best_b = b;
                adv[static_cast<std::size_t>(pos + depth)] = static_cast<Symbol>(best_b);
            }
            probes.push_back(std::move(adv));
        }
    }
    rep.fiber_capacity_sup = 0.0;
    for (const auto& y : probes) rep.fiber_capacity_sup = std::max(rep.fiber_capacity_sup, fiber_rate(y));

    rep.left_inequality_ok = rep.image_packing <= rep.source_packing + params.check_tol;
    rep.right_slack =
        rep.image_packing + rep.fiber_capacity_sup + params.check_tol - rep.source_packing;
    rep.right_inequality_ok = rep.right_slack >= 0.0;
    rep.pass = rep.left_inequality_ok && rep.right_inequality_ok;
    return rep;
}

}  // namespace packent
