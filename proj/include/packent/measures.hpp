#pragma once

#include <memory>
#include <unordered_set>

#include "packent/entropy.hpp"
#include "packent/rng.hpp"
#include "packent/shift.hpp"

namespace packent {

struct Cylinder {
    FiniteSubset window;
    std::vector<Symbol> pattern;
};

/// Mass oracle on cylinders, consistent under refinement.  Kinds:
/// bernoulli(p), markov (Z only), point mass, product of two measures on the
/// paired alphabet (s = s1 * |A2| + s2), and the X_{alpha,beta} measure that
/// puts mass 2^{-|H n W|} on each admissible pattern.
class CylinderMeasure {
  public:
    enum class Kind { bernoulli, markov, point_mass, product, xab };

    static CylinderMeasure bernoulli(std::vector<double> p) {
        CylinderMeasure m(Kind::bernoulli, static_cast<int>(p.size()));
        double total = 0.0;
        for (double v : p) {
            if (v < 0.0) throw std::invalid_argument("bernoulli: negative mass");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("bernoulli: probabilities must sum to 1");
        m.p_ = std::move(p);
        return m;
    }

    /// Stationary Markov measure on A^Z.  `transition[a][b]` is the
    /// probability of b following a; the stationary vector is required and
    /// validated.
    static CylinderMeasure markov(std::vector<std::vector<double>> transition,
                                  std::vector<double> stationary) {
        const std::size_t q = transition.size();
        if (q < 2 || stationary.size() != q)
            throw std::invalid_argument("markov: bad dimensions");
        for (const auto& row : transition) {
            if (row.size() != q) throw std::invalid_argument("markov: bad dimensions");
            double s = 0.0;
            for (double v : row) s += v;
            if (std::abs(s - 1.0) > 1e-12)
                throw std::invalid_argument("markov: rows must sum to 1");
        }
        for (std::size_t b = 0; b < q; ++b) {
            double s = 0.0;
            for (std::size_t a = 0; a < q; ++a) s += stationary[a] * transition[a][b];
            if (std::abs(s - stationary[b]) > 1e-9)
                throw std::invalid_argument("markov: vector is not stationary");
        }
        CylinderMeasure m(Kind::markov, static_cast<int>(q));
        m.trans_ = std::move(transition);
        m.p_ = std::move(stationary);
        return m;
    }

    static CylinderMeasure point_mass(Configuration y) {
        CylinderMeasure m(Kind::point_mass, y.alphabet());
        m.atom_ = std::make_shared<Configuration>(std::move(y));
        return m;
    }

    static CylinderMeasure product(CylinderMeasure first, CylinderMeasure second) {
        CylinderMeasure m(Kind::product, first.alphabet() * second.alphabet());
        m.left_ = std::make_shared<CylinderMeasure>(std::move(first));
        m.right_ = std::make_shared<CylinderMeasure>(std::move(second));
        return m;
    }

    static CylinderMeasure xab(DensitySet H) {
        CylinderMeasure m(Kind::xab, 2);
        m.H_ = std::make_shared<DensitySet>(std::move(H));
        return m;
    }

    Kind kind() const { return kind_; }
    int alphabet() const { return alphabet_; }

    double mass(const FiniteSubset& window, std::span<const Symbol> pattern) const {
        if (pattern.size() != window.size())
            throw std::invalid_argument("CylinderMeasure::mass: pattern/window mismatch");
        if (window.empty()) return 1.0;
        switch (kind_) {
            case Kind::bernoulli: {
                double m = 1.0;
                for (Symbol s : pattern) m *= p_[s];
                return m;
            }
            case Kind::markov: {
                if (window.group().kind() != GroupKind::zd || window.group().dim() != 1)
                    throw std::invalid_argument("markov measure needs windows in Z");
                double m = p_[pattern[0]];
                for (std::size_t i = 1; i < window.size(); ++i) {
                    const auto gap = window[i].v[0] - window[i - 1].v[0];
                    m *= step_probability(pattern[i - 1], pattern[i], gap);
                }
                return m;
            }
            case Kind::point_mass: {
                for (std::size_t i = 0; i < window.size(); ++i)
                    if (atom_->at(window[i]) != pattern[i]) return 0.0;
                return 1.0;
            }
            case Kind::product: {
                const int ra = right_->alphabet();
                std::vector<Symbol> a(pattern.size()), b(pattern.size());
                for (std::size_t i = 0; i < pattern.size(); ++i) {
                    a[i] = static_cast<Symbol>(pattern[i] / ra);
                    b[i] = static_cast<Symbol>(pattern[i] % ra);
                }
                return left_->mass(window, a) * right_->mass(window, b);
            }
            case Kind::xab: {
                double m = 1.0;
                for (std::size_t i = 0; i < window.size(); ++i) {
                    if (H_->contains(window[i])) {
                        m *= 0.5;
                    } else if (pattern[i] != 0) {
                        return 0.0;
                    }
                }
                return m;
            }
        }
        return 0.0;
    }

    double mass(const Cylinder& cyl) const;  // defined after Cylinder below

    /// Draw a pattern on `window`, extended by symbol 0 elsewhere.
    Configuration sample(const FiniteSubset& window, CounterRng rng) const {
        std::vector<Symbol> out(window.size());
        switch (kind_) {
            case Kind::bernoulli: {
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = draw(p_, rng.at(i));
                break;
            }
            case Kind::markov: {
                if (window.group().kind() != GroupKind::zd || window.group().dim() != 1)
                    throw std::invalid_argument("markov measure needs windows in Z");
                Symbol prev = draw(p_, rng.at(0));
                out[0] = prev;
                std::uint64_t ctr = 1;
                for (std::size_t i = 1; i < out.size(); ++i) {
                    auto gap = window[i].v[0] - window[i - 1].v[0];
                    Symbol cur = prev;
                    for (std::int64_t s = 0; s < gap; ++s)
                        cur = draw(trans_[cur], rng.at(ctr++));
                    out[i] = cur;
                    prev = cur;
                }
                break;
            }
            case Kind::point_mass: {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = atom_->at(window[i]);
                break;
            }
            case Kind::product: {
                Configuration a = left_->sample(window, rng.split(1));
                Configuration b = right_->sample(window, rng.split(2));
                const int ra = right_->alphabet();
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<Symbol>(a.at(window[i]) * ra + b.at(window[i]));
                break;
            }
            case Kind::xab: {
                for (std::size_t i = 0; i < out.size(); ++i)
                    out[i] = H_->contains(window[i]) ? static_cast<Symbol>(rng.at(i) & 1) : 0;
                break;
            }
        }
        return Configuration(alphabet_, window, std::move(out), 0);
    }

  private:
    explicit CylinderMeasure(Kind k, int alphabet) : kind_(k), alphabet_(alphabet) {}

    static Symbol draw(const std::vector<double>& dist, std::uint64_t raw) {
        double u = static_cast<double>(raw >> 11) * 0x1.0p-53;
        double acc = 0.0;
        for (std::size_t s = 0; s < dist.size(); ++s) {
            acc += dist[s];
            if (u < acc) return static_cast<Symbol>(s);
        }
        return static_cast<Symbol>(dist.size() - 1);
    }

    double step_probability(Symbol a, Symbol b, std::int64_t gap) const {
        if (gap < 1) throw std::invalid_argument("markov window is not strictly increasing");
        // dense power of the transition matrix; alphabets are tiny
        std::vector<double> row(trans_.size(), 0.0);
        row[a] = 1.0;
        for (std::int64_t s = 0; s < gap; ++s) {
            std::vector<double> next(trans_.size(), 0.0);
            for (std::size_t x = 0; x < trans_.size(); ++x) {
                if (row[x] == 0.0) continue;
                for (std::size_t y = 0; y < trans_.size(); ++y)
                    next[y] += row[x] * trans_[x][y];
            }
            row = std::move(next);
        }
        return row[b];
    }

    Kind kind_;
    int alphabet_;
    std::vector<double> p_;                    // bernoulli / markov stationary
    std::vector<std::vector<double>> trans_;   // markov
    std::shared_ptr<Configuration> atom_;      // point mass
    std::shared_ptr<CylinderMeasure> left_, right_;
    std::shared_ptr<DensitySet> H_;
};

inline double CylinderMeasure::mass(const Cylinder& cyl) const {
    return mass(cyl.window, cyl.pattern);
}

/// mu(B_{F_n}(x, eps_k)) via the cylinder identity: the ball is exactly the
/// cylinder on the product window F_k F_n, so the mass is exact at the
/// metric's threshold radii.
inline double ball_mass(const CylinderMeasure& mu, const Configuration& x, int n, int eps_index,
                        const FolnerSequence& seq) {
    const auto w = bowen_ball_window(n, eps_index, seq);
    return mu.mass(w.window, x.restrict_to(w.window));
}

struct LocalEntropyTrace {
    std::vector<int> indices;
    std::vector<double> values;  // -(1/|F_n|) log mu(B_{F_n}(x, eps))
    double tail_limsup = 0.0;
    double tail_liminf = 0.0;
    bool truncated = false;  // hit a zero-mass ball; trace stops there
    int truncated_at = -1;
};

inline LocalEntropyTrace local_entropy_trace(const CylinderMeasure& mu, const Configuration& x,
                                             int eps_index, const FolnerSequence& seq, int n_min,
                                             int n_max, double tail_fraction = 1.0 / 3.0) {
    LocalEntropyTrace out;
    for (int n = n_min; n <= n_max; ++n) {
        const double m = ball_mass(mu, x, n, eps_index, seq);
        if (m <= 0.0) {
            out.truncated = true;
            out.truncated_at = n;
            break;
        }
        out.indices.push_back(n);
        out.values.push_back(-std::log(m) / static_cast<double>(seq.size(n)));
    }
    if (!out.values.empty()) {
        const std::size_t m = out.values.size();
        std::size_t tail = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(tail_fraction * static_cast<double>(m))));
        tail = std::min(tail, m);
        out.tail_limsup = *std::max_element(out.values.end() - tail, out.values.end());
        out.tail_liminf = *std::min_element(out.values.end() - tail, out.values.end());
    }
    return out;
}

struct UpperLocalReport {
    double value = 0.0;  // sample mean of per-point tail limsups
    std::vector<double> per_point;
    std::size_t truncated_points = 0;
};

/// Monte-Carlo realization of the upper local entropy integral over Z: the
/// sample mean of per-point tail limsups.
inline UpperLocalReport upper_local_entropy_over(const CylinderMeasure& mu,
                                                 const std::vector<Configuration>& sample,
                                                 int eps_index, const FolnerSequence& seq,
                                                 int n_min, int n_max,
                                                 double tail_fraction = 1.0 / 3.0) {
    if (sample.empty()) throw std::domain_error("upper_local_entropy_over: empty sample");
    UpperLocalReport rep;
    double acc = 0.0;
    for (const auto& x : sample) {
        auto tr = local_entropy_trace(mu, x, eps_index, seq, n_min, n_max, tail_fraction);
        if (tr.truncated) {
            ++rep.truncated_points;
            rep.per_point.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        rep.per_point.push_back(tr.tail_limsup);
        acc += tr.tail_limsup;
    }
    const std::size_t good = sample.size() - rep.truncated_points;
    rep.value = rep.truncated_points > 0 ? std::numeric_limits<double>::infinity()
                                         : acc / static_cast<double>(good);
    return rep;
}

/// Observable depending on a fixed finite window.
struct LocalObservable {
    FiniteSubset window;
    std::function<double(std::span<const Symbol>)> eval;
};

inline LocalObservable cylinder_indicator(FiniteSubset window, std::vector<Symbol> pattern) {
    return LocalObservable{std::move(window),
                           [p = std::move(pattern)](std::span<const Symbol> w) {
                               for (std::size_t i = 0; i < p.size(); ++i)
                                   if (w[i] != p[i]) return 0.0;
                               return 1.0;
                           }};
}

/// (1/|F_n|) sum_{g in F_n} f(g x), evaluated through the shift action
/// (g x)_h = x_{h g}.
inline double empirical_average(const Configuration& x, const LocalObservable& f,
                                const FolnerSequence& seq, int n) {
    const Group& G = x.group();
    const FiniteSubset& F = seq.set(n);
    std::vector<Symbol> word(f.window.size());
    double acc = 0.0;
    for (const auto& g : F) {
        for (std::size_t i = 0; i < f.window.size(); ++i) word[i] = x.at(G.op(f.window[i], g));
        acc += f.eval(word);
    }
    return acc / static_cast<double>(F.size());
}

/// Max over all cylinder indicators with window inside F_{window_cap} of
/// |empirical average - mu(cylinder)|.  Small values certify approximate
/// genericity of x for mu at scale n.
inline double generic_point_diagnostic(const Configuration& x, const CylinderMeasure& mu,
                                       int window_cap, const FolnerSequence& seq, int n) {
    const FiniteSubset& W = seq.set(window_cap);
    const std::size_t w = W.size();
    const int q = mu.alphabet();
    std::size_t codes = 1;
    for (std::size_t i = 0; i < w; ++i) {
        codes *= static_cast<std::size_t>(q);
        if (codes > (std::size_t(1) << 20))
            throw ResourceError("generic_point_diagnostic: window too large");
    }

    // frequency of every full-window word along the orbit
    std::vector<double> freq(codes, 0.0);
    const Group& G = x.group();
    const FiniteSubset& F = seq.set(n);
    for (const auto& g : F) {
        std::size_t code = 0;
        for (std::size_t i = 0; i < w; ++i)
            code = code * static_cast<std::size_t>(q) + x.at(G.op(W[i], g));
        freq[code] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(F.size());

    // aggregate onto every sub-window and compare with the cylinder mass
    double worst = 0.0;
    std::vector<std::size_t> powq(w + 1, 1);
    for (std::size_t i = 1; i <= w; ++i) powq[i] = powq[i - 1] * static_cast<std::size_t>(q);
    for (std::size_t mask = 1; mask < (std::size_t(1) << w); ++mask) {
        std::vector<std::size_t> sel;
        std::vector<GroupElement> sub;
        for (std::size_t i = 0; i < w; ++i) {
            if (mask & (std::size_t(1) << i)) {
                sel.push_back(i);
                sub.push_back(W[i]);
            }
        }
        std::size_t sub_codes = powq[sel.size()];
        std::vector<double> emp(sub_codes, 0.0);
        for (std::size_t code = 0; code < codes; ++code) {
            if (freq[code] == 0.0) continue;
            std::size_t pc = 0;
            for (std::size_t i : sel) pc = pc * q + (code / powq[w - 1 - i]) % q;
            emp[pc] += freq[code];
        }
        FiniteSubset subwin(W.group(), sub);
        std::vector<Symbol> pat(sel.size());
        for (std::size_t pc = 0; pc < sub_codes; ++pc) {
            std::size_t rest = pc;
            for (std::size_t i = sel.size(); i-- > 0;) {
                pat[i] = static_cast<Symbol>(rest % q);
                rest /= q;
            }
            worst = std::max(worst, std::abs(emp[pc] * inv - mu.mass(subwin, pat)));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Variational principle at desk scale
// ---------------------------------------------------------------------------

struct VariationalParams {
    std::vector<int> N_schedule{1};
    int depth = 0;  // 0: tree depth
    int eps_index = 0;
    double bisection_tol = 1e-6;
    double lower_bound_tol = 1e-6;
    double tail_fraction = 1.0 / 3.0;
    int sample_count = 100;
    std::uint64_t seed = 7;
};

struct VariationalReport {
    double packing_estimate = 0.0;
    std::vector<double> local_estimates;
    std::vector<bool> fully_supported;  // every leaf carries positive mass
    double best_local = 0.0;
    double gap = 0.0;  // packing - best local
    bool lower_bound_ok = false;
};

namespace detail {

/// mu(Z) = 1 at tree resolution: level-D cylinder masses must sum to one.
/// On failure, names an escaping cylinder when one can be located cheaply.
inline void require_supported(const CylinderTree& tree, const CylinderMeasure& mu) {
    const int D = tree.depth();
    const auto& lv = tree.level(D);
    double total = 0.0;
    for (std::size_t i = 0; i < lv.size(); ++i) total += mu.mass(lv.window, lv.pattern(i));
    if (std::abs(total - 1.0) <= 1e-9) return;

    // walk down to the first level that leaks and exhibit a missing pattern
    for (int n = 0; n <= D; ++n) {
        const auto& level = tree.level(n);
        double t = 0.0;
        for (std::size_t i = 0; i < level.size(); ++i)
            t += mu.mass(level.window, level.pattern(i));
        if (std::abs(t - 1.0) <= 1e-9) continue;
        std::string name = "level " + std::to_string(n);
        const std::size_t q = static_cast<std::size_t>(tree.alphabet());
        std::size_t combos = 1;
        bool small = true;
        for (std::size_t i = 0; i < level.window.size() && small; ++i) {
            combos *= q;
            if (combos > 65536) small = false;
        }
        if (small) {
            std::vector<Symbol> pat(level.window.size(), 0);
            std::unordered_set<std::string> present;
            for (std::size_t i = 0; i < level.size(); ++i) {
                auto p = level.pattern(i);
                present.insert(std::string(p.begin(), p.end()));
            }
            for (std::size_t c = 0; c < combos; ++c) {
                std::size_t rest = c;
                for (std::size_t i = pat.size(); i-- > 0;) {
                    pat[i] = static_cast<Symbol>(rest % q);
                    rest /= q;
                }
                if (present.count(std::string(pat.begin(), pat.end()))) continue;
                if (mu.mass(level.window, pat) > 0.0) {
                    name = "cylinder [" + pattern_string(pat) + "] at level " + std::to_string(n);
                    break;
                }
            }
        }
        throw std::domain_error(
            "variational_gap: candidate measure is not supported on the tree; escaping " + name +
            " (level mass " + std::to_string(t) + ")");
    }
    throw std::domain_error("variational_gap: candidate measure mass at depth " +
                            std::to_string(D) + " is " + std::to_string(total));
}

}  // namespace detail

/// Thm-1.1-style check: packing estimate minus the best upper local entropy
/// over the candidate measures.  The lower-bound direction (local <= packing)
/// is asserted; the sup direction is reported only, since the candidate set
/// is finite.
inline VariationalReport variational_gap(const CylinderTree& tree,
                                         const std::vector<CylinderMeasure>& candidates,
                                         const VariationalParams& params) {
    if (candidates.empty()) throw std::invalid_argument("variational_gap: no candidates");
    VariationalReport rep;
    const int D = params.depth > 0 ? params.depth : tree.depth();
    const int k = params.eps_index;
    const int N = params.N_schedule.back();

    rep.packing_estimate =
        packing_entropy_estimate(tree, params.N_schedule, D, k, params.bisection_tol).value;

    const FiniteSubset& sample_window = tree.seq().set(D + k);
    rep.best_local = 0.0;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        const auto& mu = candidates[ci];
        detail::require_supported(tree, mu);

        const auto& leaf = tree.level(tree.depth());
        bool full = true;
        for (std::size_t i = 0; i < leaf.size() && full; ++i)
            full = mu.mass(leaf.window, leaf.pattern(i)) > 0.0;
        rep.fully_supported.push_back(full);

        std::vector<Configuration> pts;
        if (mu.kind() == CylinderMeasure::Kind::point_mass) {
            pts.push_back(mu.sample(sample_window, CounterRng(params.seed)));
        } else {
            CounterRng rng(params.seed, 0x7061636bu + ci);
            for (int i = 0; i < params.sample_count; ++i)
                pts.push_back(mu.sample(sample_window, rng.split(i)));
        }
        auto local = upper_local_entropy_over(mu, pts, k, tree.seq(), N, D - k,
                                              params.tail_fraction);
        rep.local_estimates.push_back(local.value);
        rep.best_local = std::max(rep.best_local, local.value);
    }
    rep.gap = rep.packing_estimate - rep.best_local;
    rep.lower_bound_ok = true;
    for (double v : rep.local_estimates)
        if (v > rep.packing_estimate + params.lower_bound_tol) rep.lower_bound_ok = false;
    return rep;
}

}  // namespace packent
