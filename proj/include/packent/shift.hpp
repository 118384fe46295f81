#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <variant>

#include "packent/folner.hpp"
#include "packent/group.hpp"

namespace packent {

using Symbol = std::uint8_t;

/// Raised when a computation would exceed a configured size limit.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what, long long detail = -1)
        : std::runtime_error(what), detail_value(detail) {}
    long long detail_value;
};

/// Raised when a verified inequality fails: an implementation bug, not bad input.
struct CheckFailure : std::logic_error {
    using std::logic_error::logic_error;
};

constexpr std::size_t kDefaultNodeBudget = std::size_t(1) << 24;

inline char symbol_char(Symbol s) {
    return s < 10 ? static_cast<char>('0' + s) : static_cast<char>('a' + (s - 10));
}

inline Symbol symbol_from_char(char c) {
    if (c >= '0' && c <= '9') return static_cast<Symbol>(c - '0');
    if (c >= 'a' && c <= 'z') return static_cast<Symbol>(c - 'a' + 10);
    throw std::invalid_argument("bad symbol character");
}

inline std::string pattern_string(std::span<const Symbol> pat) {
    std::string s;
    s.reserve(pat.size());
    for (Symbol x : pat) s.push_back(symbol_char(x));
    return s;
}

/// A point of the full shift at finite resolution: a pattern on a finite
/// window extended by a default symbol everywhere else.
class Configuration {
  public:
    Configuration(int alphabet, FiniteSubset window, std::vector<Symbol> symbols,
                  Symbol default_symbol = 0)
        : alphabet_(alphabet),
          window_(std::move(window)),
          symbols_(std::move(symbols)),
          default_(default_symbol) {
        if (alphabet_ < 2) throw std::invalid_argument("Configuration: alphabet size >= 2");
        if (symbols_.size() != window_.size())
            throw std::invalid_argument("Configuration: one symbol per window element");
        for (Symbol s : symbols_)
            if (s >= alphabet_) throw std::invalid_argument("Configuration: symbol out of range");
        if (default_ >= alphabet_)
            throw std::invalid_argument("Configuration: default symbol out of range");
    }

    static Configuration constant(int alphabet, const Group& g, Symbol value) {
        return Configuration(alphabet, FiniteSubset(g, {}), {}, value);
    }

    int alphabet() const { return alphabet_; }
    const Group& group() const { return window_.group(); }
    const FiniteSubset& window() const { return window_; }
    Symbol default_symbol() const { return default_; }

    Symbol at(const GroupElement& g) const {
        auto i = window_.index_of(g);
        return i == FiniteSubset::npos ? default_ : symbols_[i];
    }

    /// Left action: (g x)_h = x_{h g}.
    Configuration shifted(const GroupElement& g) const {
        const Group& G = group();
        const GroupElement ginv = G.inverse(g);
        std::vector<std::pair<GroupElement, Symbol>> moved;
        moved.reserve(window_.size());
        for (std::size_t i = 0; i < window_.size(); ++i)
            moved.emplace_back(G.op(window_[i], ginv), symbols_[i]);
        std::sort(moved.begin(), moved.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<GroupElement> w;
        std::vector<Symbol> s;
        w.reserve(moved.size());
        s.reserve(moved.size());
        for (auto& [e, sym] : moved) {
            w.push_back(e);
            s.push_back(sym);
        }
        return Configuration(alphabet_, FiniteSubset(group(), std::move(w)), std::move(s),
                             default_);
    }

    std::vector<Symbol> restrict_to(const FiniteSubset& W) const {
        std::vector<Symbol> out;
        out.reserve(W.size());
        for (const auto& g : W) out.push_back(at(g));
        return out;
    }

    bool operator==(const Configuration& other) const {
        return alphabet_ == other.alphabet_ && window_ == other.window_ &&
               symbols_ == other.symbols_ && default_ == other.default_;
    }

  private:
    int alphabet_;
    FiniteSubset window_;
    std::vector<Symbol> symbols_;
    Symbol default_;
};

using Metric = std::function<double(const Configuration&, const Configuration&)>;

/// The cylinder ultrametric of a symbolic system: 1 when x, y differ on F_0,
/// e^{-|F_n|} with n the deepest window of agreement, 0 past the depth cap.
/// Requires an exhausting family with F_0 = {e}.
class CylinderMetric {
  public:
    CylinderMetric(FolnerSequence seq, int depth_cap) : seq_(std::move(seq)), cap_(depth_cap) {
        if (seq_.min_index() != 0 || !seq_.exhausting())
            throw std::invalid_argument(
                "CylinderMetric: family must start at F_0 = {e} and exhaust the group");
        if (seq_.set(0).size() != 1)
            throw std::invalid_argument("CylinderMetric: F_0 must be the identity singleton");
    }

    const FolnerSequence& seq() const { return seq_; }
    int depth_cap() const { return cap_; }

    double operator()(const Configuration& x, const Configuration& y) const {
        if (x.alphabet() != y.alphabet())
            throw std::invalid_argument("CylinderMetric: mismatched alphabets");
        for (const auto& g : seq_.set(0))
            if (x.at(g) != y.at(g)) return 1.0;
        int n = 0;
        while (n < cap_) {
            bool agree = true;
            for (const auto& g : seq_.delta(n + 1)) {
                if (x.at(g) != y.at(g)) {
                    agree = false;
                    break;
                }
            }
            if (!agree) break;
            ++n;
        }
        if (n >= cap_) return 0.0;  // equal to depth cap: truncation convention
        return std::exp(-static_cast<double>(seq_.size(n)));
    }

  private:
    FolnerSequence seq_;
    int cap_;
};

/// Metric of the (T,T^-1) system on {1,-1}^Z: d(x,y) = 2^{-min{|i| : x_i != y_i}}.
class WalkMetric {
  public:
    explicit WalkMetric(int scan_cap) : cap_(scan_cap) {}

    double operator()(const Configuration& x, const Configuration& y) const {
        for (int r = 0; r <= cap_; ++r) {
            if (x.at(make_z(r)) != y.at(make_z(r)) || x.at(make_z(-r)) != y.at(make_z(-r)))
                return std::pow(2.0, -r);
        }
        return 0.0;
    }

  private:
    int cap_;
};

inline double symbolic_distance(const Configuration& x, const Configuration& y,
                                const FolnerSequence& seq, int depth_cap) {
    return CylinderMetric(seq, depth_cap)(x, y);
}

inline double bowen_distance(const Configuration& x, const Configuration& y,
                             const FiniteSubset& F, const Metric& base) {
    if (F.empty()) throw std::invalid_argument("bowen_distance: F must be non-empty");
    double best = 0.0;
    for (const auto& g : F) {
        best = std::max(best, base(x.shifted(g), y.shifted(g)));
        if (best >= 1.0) break;
    }
    return best;
}

struct BowenBallWindow {
    FiniteSubset window;
    int eps_index = 0;
    /// Set when identifying the product window F_k F_n with the inflated
    /// window F_{n+k} would be one-sided (the cylinder at level n+k is then
    /// only a subset of the ball).
    bool superset_only = false;
};

/// Threshold index of a radius under the cylinder metric: eps in
/// (e^{-|F_1|}, 1] -> 0 and eps in (e^{-|F_{k+1}|}, e^{-|F_k|}] -> k.
inline int eps_to_index(double eps, const FolnerSequence& seq) {
    if (eps <= 0.0 || eps > 1.0) throw std::invalid_argument("eps must lie in (0, 1]");
    int k = 0;
    while (eps <= std::exp(-static_cast<double>(seq.size(k + 1)))) {
        ++k;
        if (k > 512) throw std::invalid_argument("eps too small for this family");
    }
    return k;
}

/// Window W with B_{F_n}(x, eps_k) = [x|_W] under the cylinder metric:
/// W = F_n for k = 0 and W = F_k F_n otherwise.
inline BowenBallWindow bowen_ball_window(int n, int eps_index, const FolnerSequence& seq) {
    if (eps_index < 0) throw std::invalid_argument("bowen_ball_window: eps_index >= 0");
    BowenBallWindow out{seq.set(n), eps_index, false};
    if (eps_index > 0) {
        out.window = set_product(seq.set(eps_index), seq.set(n));
        out.superset_only = !(out.window == seq.set(n + eps_index));
    }
    return out;
}

inline BowenBallWindow bowen_ball_window_eps(int n, double eps, const FolnerSequence& seq) {
    return bowen_ball_window(n, eps_to_index(eps, seq), seq);
}

/// H <= G with prescribed lower/upper densities along a Folner family.
/// The stock construction on Z alternates sparse and dense blocks whose
/// lengths grow by a factor of 4; the inner block densities are tuned so the
/// running density along centered boxes has liminf alpha and limsup beta.
class DensitySet {
  public:
    using MemberFn = std::function<bool(const GroupElement&)>;

    static DensitySet geometric_blocks(double alpha, double beta) {
        if (!(0.0 <= alpha && alpha <= beta && beta <= 1.0))
            throw std::invalid_argument("DensitySet: need 0 <= alpha <= beta <= 1");
        // Inner densities solve the factor-4 fixed point equations
        //   alpha = sup/4 + 3a/4,  beta = inf/4 + 3b/4
        // with clamping when the targets are not jointly reachable.
        const std::int64_t den = 2520;
        auto A = static_cast<std::int64_t>(std::llround(alpha * 840));
        auto B = static_cast<std::int64_t>(std::llround(beta * 840));
        std::int64_t a_num = std::clamp<std::int64_t>(4 * A - B, 0, den);
        std::int64_t b_num = std::clamp<std::int64_t>(4 * B - A, 0, den);
        MemberFn fn = [a_num, b_num, den](const GroupElement& g) {
            std::int64_t p = std::abs(g.v[0]);
            if (g.flip) return false;
            if (p == 0) return a_num >= den;
            std::int64_t base = 1;
            int block = 0;
            while (base * 4 <= p) {
                base *= 4;
                ++block;
            }
            const std::int64_t num = (block % 2 == 1) ? b_num : a_num;
            const std::int64_t idx = p - base;
            return ((idx + 1) * num) / den > (idx * num) / den;
        };
        return DensitySet(std::move(fn), alpha, beta);
    }

    static DensitySet full() {
        return DensitySet([](const GroupElement&) { return true; }, 1.0, 1.0);
    }

    static DensitySet none() {
        return DensitySet([](const GroupElement&) { return false; }, 0.0, 0.0);
    }

    static DensitySet custom(MemberFn fn, double alpha, double beta) {
        return DensitySet(std::move(fn), alpha, beta);
    }

    bool contains(const GroupElement& g) const { return member_(g); }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }

  private:
    DensitySet(MemberFn fn, double a, double b) : member_(std::move(fn)), alpha_(a), beta_(b) {}
    MemberFn member_;
    double alpha_, beta_;
};

struct DensityTrace {
    std::vector<int> indices;
    std::vector<double> ratios;  // |H n F_n| / |F_n|
    double min_ratio = 0.0, max_ratio = 0.0;
    double tail_min = 0.0, tail_max = 0.0;  // over the last third of the range
};

inline DensityTrace density_trace(const DensitySet& H, const FolnerSequence& seq, int n_max,
                                  double tail_fraction = 1.0 / 3.0) {
    if (n_max < seq.min_index()) throw std::invalid_argument("density_trace: n_max too small");
    DensityTrace out;
    std::size_t count = 0;
    for (int n = seq.min_index(); n <= n_max; ++n) {
        for (const auto& g : seq.delta(n))
            if (H.contains(g)) ++count;
        out.indices.push_back(n);
        out.ratios.push_back(static_cast<double>(count) / static_cast<double>(seq.size(n)));
    }
    out.min_ratio = *std::min_element(out.ratios.begin(), out.ratios.end());
    out.max_ratio = *std::max_element(out.ratios.begin(), out.ratios.end());
    const std::size_t m = out.ratios.size();
    std::size_t tail_len = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        std::llround(tail_fraction * double(m))));
    tail_len = std::min(tail_len, m);
    out.tail_min = *std::min_element(out.ratios.end() - tail_len, out.ratios.end());
    out.tail_max = *std::max_element(out.ratios.end() - tail_len, out.ratios.end());
    return out;
}

// ---------------------------------------------------------------------------
// Cylinder trees
// ---------------------------------------------------------------------------

/// Depth-indexed prefix tree of admissible patterns over nested windows
/// F_0 <= F_1 <= ... <= F_D.  Level n holds the admissible patterns on F_n in
/// canonical window order; children of a node are its one-level extensions.
/// Every node reaches depth D (dead branches are pruned on construction), so
/// the represented closed set at depth D is the union of the level-D cylinders.
class CylinderTree {
  public:
    struct Node {
        std::uint32_t parent = 0;
        std::uint32_t first_child = 0;
        std::uint32_t child_count = 0;
    };

    struct Level {
        FiniteSubset window;
        std::size_t pattern_len = 0;
        std::vector<Symbol> pat;  // flat: node i occupies [i*len, (i+1)*len)
        std::vector<Node> nodes;

        std::span<const Symbol> pattern(std::size_t i) const {
            return std::span<const Symbol>(pat.data() + i * pattern_len, pattern_len);
        }
        std::size_t size() const { return nodes.size(); }
    };

    int depth() const { return static_cast<int>(levels_.size()) - 1; }
    int alphabet() const { return alphabet_; }
    const FolnerSequence& seq() const { return seq_; }
    const Level& level(int n) const { return levels_.at(static_cast<std::size_t>(n)); }
    std::size_t level_size(int n) const { return level(n).size(); }

    std::size_t total_nodes() const {
        std::size_t t = 0;
        for (const auto& lv : levels_) t += lv.size();
        return t;
    }

    /// Canonical construction from per-level pattern lists.  Sorts levels,
    /// links parents by restriction, prunes branches that die before depth.
    static CylinderTree from_levels(const FolnerSequence& seq, int alphabet,
                                    std::vector<std::vector<std::vector<Symbol>>> raw_levels,
                                    std::size_t node_budget = kDefaultNodeBudget) {
        if (seq.min_index() != 0)
            throw std::invalid_argument("CylinderTree: family must be indexed from 0");
        if (raw_levels.empty()) throw std::invalid_argument("CylinderTree: no levels");
        CylinderTree tree;
        tree.alphabet_ = alphabet;
        tree.seq_ = seq;
        const int D = static_cast<int>(raw_levels.size()) - 1;

        for (int n = 0; n <= D; ++n) {
            if (raw_levels[n].size() > node_budget)
                throw ResourceError("CylinderTree: node budget exceeded at level " +
                                        std::to_string(n),
                                    n);
            Level lv{seq.set(n), seq.set(n).size(), {}, {}};
            auto& pats = raw_levels[n];
            std::sort(pats.begin(), pats.end());
            pats.erase(std::unique(pats.begin(), pats.end()), pats.end());
            for (const auto& p : pats) {
                if (p.size() != lv.pattern_len)
                    throw std::invalid_argument("CylinderTree: pattern length mismatch at level " +
                                                std::to_string(n));
            }

            if (n == 0) {
                for (const auto& p : pats) {
                    lv.pat.insert(lv.pat.end(), p.begin(), p.end());
                    lv.nodes.push_back(Node{});
                }
            } else {
                // restriction positions of F_{n-1} inside F_n
                const auto& prev = tree.levels_.back();
                std::vector<std::size_t> pos;
                pos.reserve(prev.window.size());
                for (const auto& g : prev.window) {
                    auto i = lv.window.index_of(g);
                    if (i == FiniteSubset::npos)
                        throw std::invalid_argument("CylinderTree: windows are not nested");
                    pos.push_back(i);
                }
                std::unordered_map<std::string, std::uint32_t> prev_index;
                prev_index.reserve(prev.size() * 2);
                for (std::size_t i = 0; i < prev.size(); ++i) {
                    auto pp = prev.pattern(i);
                    prev_index.emplace(std::string(pp.begin(), pp.end()),
                                       static_cast<std::uint32_t>(i));
                }
                std::vector<std::pair<std::uint32_t, const std::vector<Symbol>*>> order;
                order.reserve(pats.size());
                for (const auto& p : pats) {
                    std::string key;
                    key.reserve(pos.size());
                    for (auto i : pos) key.push_back(static_cast<char>(p[i]));
                    auto it = prev_index.find(key);
                    if (it == prev_index.end())
                        throw std::invalid_argument(
                            "CylinderTree: level " + std::to_string(n) +
                            " pattern restricts to a missing parent");
                    order.emplace_back(it->second, &p);
                }
                std::stable_sort(order.begin(), order.end(),
                                 [](const auto& a, const auto& b) {
                                     if (a.first != b.first) return a.first < b.first;
                                     return *a.second < *b.second;
                                 });
                auto& parent_nodes = tree.levels_.back().nodes;
                for (const auto& [pi, pp] : order) {
                    if (parent_nodes[pi].child_count == 0)
                        parent_nodes[pi].first_child =
                            static_cast<std::uint32_t>(lv.nodes.size());
                    parent_nodes[pi].child_count++;
                    lv.pat.insert(lv.pat.end(), pp->begin(), pp->end());
                    lv.nodes.push_back(Node{pi, 0, 0});
                }
            }
            tree.levels_.push_back(std::move(lv));
        }
        tree.prune_dead_branches();
        return tree;
    }

    /// Union of the represented sets: levelwise merge of patterns.
    friend CylinderTree tree_union(const CylinderTree& a, const CylinderTree& b) {
        if (a.depth() != b.depth() || a.alphabet() != b.alphabet())
            throw std::invalid_argument("tree_union: incompatible trees");
        std::vector<std::vector<std::vector<Symbol>>> raw(a.levels_.size());
        for (int n = 0; n <= a.depth(); ++n) {
            for (std::size_t i = 0; i < a.level_size(n); ++i) {
                auto p = a.level(n).pattern(i);
                raw[n].emplace_back(p.begin(), p.end());
            }
            for (std::size_t i = 0; i < b.level_size(n); ++i) {
                auto p = b.level(n).pattern(i);
                raw[n].emplace_back(p.begin(), p.end());
            }
        }
        return from_levels(a.seq_, a.alphabet_, std::move(raw));
    }

    /// Subtree through one node at `split_level`: its ancestors plus all of
    /// its descendants, as a tree of the same depth.
    CylinderTree part_through(int split_level, std::size_t node_index) const {
        std::vector<std::vector<char>> keep(levels_.size());
        for (std::size_t n = 0; n < levels_.size(); ++n)
            keep[n].assign(levels_[n].size(), 0);
        keep[split_level][node_index] = 1;
        // ancestors
        std::uint32_t cur = levels_[split_level].nodes[node_index].parent;
        for (int n = split_level - 1; n >= 0; --n) {
            keep[n][cur] = 1;
            cur = levels_[n].nodes[cur].parent;
        }
        // descendants
        for (int n = split_level; n < depth(); ++n) {
            for (std::size_t i = 0; i < levels_[n].size(); ++i) {
                if (!keep[n][i]) continue;
                const Node& nd = levels_[n].nodes[i];
                for (std::uint32_t c = 0; c < nd.child_count; ++c)
                    keep[n + 1][nd.first_child + c] = 1;
            }
        }
        std::vector<std::vector<std::vector<Symbol>>> raw(levels_.size());
        for (std::size_t n = 0; n < levels_.size(); ++n) {
            for (std::size_t i = 0; i < levels_[n].size(); ++i) {
                if (!keep[n][i]) continue;
                auto p = levels_[n].pattern(i);
                raw[n].emplace_back(p.begin(), p.end());
            }
        }
        return from_levels(seq_, alphabet_, std::move(raw));
    }

  private:
    void prune_dead_branches() {
        const int D = depth();
        std::vector<std::vector<char>> alive(levels_.size());
        alive[D].assign(levels_[D].size(), 1);
        for (int n = D - 1; n >= 0; --n) {
            alive[n].assign(levels_[n].size(), 0);
            for (std::size_t i = 0; i < levels_[n + 1].size(); ++i)
                if (alive[n + 1][i]) alive[n][levels_[n + 1].nodes[i].parent] = 1;
        }
        bool any_dead = false;
        for (int n = 0; n <= D; ++n)
            for (auto flag : alive[n]) any_dead |= !flag;
        if (!any_dead) return;

        std::vector<Level> out;
        std::vector<std::uint32_t> remap_prev;
        for (int n = 0; n <= D; ++n) {
            Level lv{levels_[n].window, levels_[n].pattern_len, {}, {}};
            std::vector<std::uint32_t> remap(levels_[n].size(), 0);
            for (std::size_t i = 0; i < levels_[n].size(); ++i) {
                if (!alive[n][i]) continue;
                remap[i] = static_cast<std::uint32_t>(lv.nodes.size());
                auto p = levels_[n].pattern(i);
                lv.pat.insert(lv.pat.end(), p.begin(), p.end());
                Node nd = levels_[n].nodes[i];
                if (n > 0) nd.parent = remap_prev[nd.parent];
                nd.first_child = 0;
                nd.child_count = 0;
                lv.nodes.push_back(nd);
            }
            if (n > 0) {
                auto& parents = out.back().nodes;
                for (std::size_t i = 0; i < lv.nodes.size(); ++i) {
                    Node& nd = lv.nodes[i];
                    if (parents[nd.parent].child_count == 0)
                        parents[nd.parent].first_child = static_cast<std::uint32_t>(i);
                    parents[nd.parent].child_count++;
                }
            }
            out.push_back(std::move(lv));
            remap_prev = std::move(remap);
        }
        levels_ = std::move(out);
    }

    int alphabet_ = 2;
    FolnerSequence seq_ = FolnerSequence::centered_boxes(Group::z());
    std::vector<Level> levels_;
};

// ---------------------------------------------------------------------------
// Subset specifications and tree building
// ---------------------------------------------------------------------------

struct PointSampleSpec {
    std::vector<Configuration> points;
};

/// Per-coordinate constraint: the admissible symbols at each group element.
struct PredicateSpec {
    std::function<std::vector<Symbol>(const GroupElement&)> allowed;
};

struct ExplicitLevelsSpec {
    std::vector<std::vector<std::vector<Symbol>>> levels;
};

using SubsetSpec = std::variant<PointSampleSpec, PredicateSpec, ExplicitLevelsSpec>;

inline PredicateSpec full_shift_spec(int alphabet) {
    std::vector<Symbol> all;
    for (int s = 0; s < alphabet; ++s) all.push_back(static_cast<Symbol>(s));
    return PredicateSpec{[all](const GroupElement&) { return all; }};
}

/// X_H: coordinates in H are free over {0,1}, all others are pinned to 0.
inline PredicateSpec xab_spec(DensitySet H) {
    return PredicateSpec{[H = std::move(H)](const GroupElement& g) {
        return H.contains(g) ? std::vector<Symbol>{0, 1} : std::vector<Symbol>{0};
    }};
}

inline CylinderTree build_tree(const SubsetSpec& spec, int depth, const FolnerSequence& seq,
                               int alphabet, std::size_t node_budget = kDefaultNodeBudget) {
    if (depth < 0) throw std::invalid_argument("build_tree: depth >= 0");
    std::vector<std::vector<std::vector<Symbol>>> raw(static_cast<std::size_t>(depth) + 1);

    if (const auto* ps = std::get_if<PointSampleSpec>(&spec)) {
        if (ps->points.empty()) throw std::invalid_argument("build_tree: empty point sample");
        for (int n = 0; n <= depth; ++n) {
            const FiniteSubset& W = seq.set(n);
            for (const auto& x : ps->points) raw[n].push_back(x.restrict_to(W));
        }
        return CylinderTree::from_levels(seq, alphabet, std::move(raw), node_budget);
    }

    if (const auto* pr = std::get_if<PredicateSpec>(&spec)) {
        // extend level by level over the fresh coordinates
        std::vector<std::vector<Symbol>> cur;
        for (int n = 0; n <= depth; ++n) {
            const FiniteSubset& W = seq.set(n);
            const FiniteSubset D = seq.delta(n);
            std::vector<std::vector<Symbol>> choice;
            choice.reserve(D.size());
            std::size_t combos = 1;
            for (const auto& g : D) {
                auto opts = pr->allowed(g);
                if (opts.empty())
                    throw std::invalid_argument("build_tree: predicate admits no symbol at " +
                                                seq.group().format(g));
                combos *= opts.size();
                choice.push_back(std::move(opts));
                if (combos > node_budget)
                    throw ResourceError("build_tree: node budget exceeded at level " +
                                            std::to_string(n),
                                        n);
            }
            std::size_t expected = (n == 0 ? 1 : cur.size()) * combos;
            if (expected > node_budget)
                throw ResourceError(
                    "build_tree: node budget exceeded at level " + std::to_string(n), n);

            // layout map: position in F_n order -> (from parent? index) or (delta index)
            std::vector<std::pair<bool, std::size_t>> layout;
            layout.reserve(W.size());
            const FiniteSubset* prevW = n > 0 ? &seq.set(n - 1) : nullptr;
            for (const auto& g : W) {
                std::size_t di = D.index_of(g);
                if (di != FiniteSubset::npos) {
                    layout.emplace_back(false, di);
                } else {
                    layout.emplace_back(true, prevW->index_of(g));
                }
            }

            std::vector<std::vector<Symbol>> next;
            next.reserve(expected);
            std::vector<std::size_t> pick(D.size(), 0);
            const std::size_t parents = n == 0 ? 1 : cur.size();
            for (std::size_t pi = 0; pi < parents; ++pi) {
                std::fill(pick.begin(), pick.end(), 0);
                while (true) {
                    std::vector<Symbol> pat(W.size());
                    for (std::size_t j = 0; j < W.size(); ++j) {
                        auto [from_parent, idx] = layout[j];
                        pat[j] = from_parent ? cur[pi][idx] : choice[idx][pick[idx]];
                    }
                    next.push_back(std::move(pat));
                    std::size_t carry = 0;
                    for (; carry < pick.size(); ++carry) {
                        if (++pick[carry] < choice[carry].size()) break;
                        pick[carry] = 0;
                    }
                    if (carry == pick.size()) break;
                }
            }
            raw[n] = next;
            cur = std::move(next);
        }
        return CylinderTree::from_levels(seq, alphabet, std::move(raw), node_budget);
    }

    const auto& ex = std::get<ExplicitLevelsSpec>(spec);
    if (static_cast<int>(ex.levels.size()) < depth + 1)
        throw std::invalid_argument("build_tree: explicit levels shallower than depth");
    raw.assign(ex.levels.begin(), ex.levels.begin() + depth + 1);
    return CylinderTree::from_levels(seq, alphabet, std::move(raw), node_budget);
}

}  // namespace packent
