#pragma once

#include <bit>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "packent/shift.hpp"

namespace packent {

enum class SelectMode { exact, greedy };

constexpr std::size_t kMaxExactSeparated = 64;
constexpr std::size_t kMaxExactSpanning = 24;

struct SelectionResult {
    std::size_t count = 0;
    std::vector<std::size_t> witness;
    SelectMode mode = SelectMode::exact;
};

namespace detail {

inline std::vector<std::uint64_t> conflict_masks(const std::vector<Configuration>& points,
                                                 const FiniteSubset& F, double eps,
                                                 const Metric& base) {
    const std::size_t n = points.size();
    std::vector<std::uint64_t> adj(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (bowen_distance(points[i], points[j], F, base) <= eps) {
                adj[i] |= (std::uint64_t(1) << j);
                adj[j] |= (std::uint64_t(1) << i);
            }
        }
    }
    return adj;
}

// max independent set, branch and bound over <= 64 vertices
inline void mis_recurse(const std::vector<std::uint64_t>& adj, std::uint64_t candidates,
                        std::uint64_t chosen, std::uint64_t& best) {
    if (std::popcount(chosen) + std::popcount(candidates) <= std::popcount(best)) return;
    if (candidates == 0) {
        if (std::popcount(chosen) > std::popcount(best)) best = chosen;
        return;
    }
    const int v = std::countr_zero(candidates);
    const std::uint64_t bit = std::uint64_t(1) << v;
    mis_recurse(adj, candidates & ~(adj[v] | bit), chosen | bit, best);  // take v
    mis_recurse(adj, candidates & ~bit, chosen, best);                   // skip v
}

}  // namespace detail

/// Largest (exact) or maximal (greedy) subset with pairwise d_F > eps.
inline SelectionResult max_separated(const std::vector<Configuration>& points,
                                     const FiniteSubset& F, double eps, const Metric& base,
                                     SelectMode mode) {
    SelectionResult out;
    out.mode = mode;
    if (points.empty()) return out;
    if (mode == SelectMode::exact) {
        if (points.size() > kMaxExactSeparated)
            throw ResourceError(
                "max_separated: exact mode limited to 64 points, use greedy",
                static_cast<long long>(points.size()));
        auto adj = detail::conflict_masks(points, F, eps, base);
        std::uint64_t all = points.size() == 64 ? ~std::uint64_t(0)
                                                : (std::uint64_t(1) << points.size()) - 1;
        std::uint64_t best = 0;
        detail::mis_recurse(adj, all, 0, best);
        for (std::size_t i = 0; i < points.size(); ++i)
            if (best & (std::uint64_t(1) << i)) out.witness.push_back(i);
    } else {
        for (std::size_t i = 0; i < points.size(); ++i) {
            bool ok = true;
            for (std::size_t j : out.witness) {
                if (bowen_distance(points[i], points[j], F, base) <= eps) {
                    ok = false;
                    break;
                }
            }
            if (ok) out.witness.push_back(i);
        }
    }
    out.count = out.witness.size();
    return out;
}

/// Smallest (exact) or greedily chosen subset of `candidates` whose closed
/// eps-balls in d_F cover every target.
inline SelectionResult min_spanning(const std::vector<Configuration>& candidates,
                                    const std::vector<Configuration>& targets,
                                    const FiniteSubset& F, double eps, const Metric& base,
                                    SelectMode mode) {
    if (candidates.empty() || targets.empty())
        throw std::invalid_argument("min_spanning: empty inputs");
    const std::size_t nc = candidates.size(), nt = targets.size();
    std::vector<std::vector<char>> covers(nc, std::vector<char>(nt, 0));
    std::vector<char> coverable(nt, 0);
    for (std::size_t i = 0; i < nc; ++i) {
        for (std::size_t t = 0; t < nt; ++t) {
            if (bowen_distance(targets[t], candidates[i], F, base) <= eps) {
                covers[i][t] = 1;
                coverable[t] = 1;
            }
        }
    }
    std::vector<std::size_t> uncovered_list;
    for (std::size_t t = 0; t < nt; ++t)
        if (!coverable[t]) uncovered_list.push_back(t);
    if (!uncovered_list.empty()) {
        std::string msg = "min_spanning: no candidate within eps of targets";
        for (auto t : uncovered_list) msg += " " + std::to_string(t);
        throw std::domain_error(msg);
    }

    SelectionResult out;
    out.mode = mode;
    if (mode == SelectMode::greedy) {
        std::vector<char> covered(nt, 0);
        std::size_t remaining = nt;
        while (remaining > 0) {
            std::size_t best = 0, best_gain = 0;
            for (std::size_t i = 0; i < nc; ++i) {
                std::size_t gain = 0;
                for (std::size_t t = 0; t < nt; ++t)
                    if (!covered[t] && covers[i][t]) ++gain;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = i;
                }
            }
            out.witness.push_back(best);
            for (std::size_t t = 0; t < nt; ++t)
                if (covers[best][t] && !covered[t]) {
                    covered[t] = 1;
                    --remaining;
                }
        }
    } else {
        if (nc > kMaxExactSpanning)
            throw ResourceError("min_spanning: exact mode limited to 24 candidates, use greedy",
                                static_cast<long long>(nc));
        // depth-first set cover on the first uncovered target
        std::vector<std::size_t> best_sel(nc + 1);
        std::size_t best_size = nc + 1;
        std::vector<std::size_t> cur;
        std::vector<int> cover_count(nt, 0);
        auto first_uncovered = [&]() -> std::size_t {
            for (std::size_t t = 0; t < nt; ++t)
                if (cover_count[t] == 0) return t;
            return nt;
        };
        std::function<void()> rec = [&]() {
            if (cur.size() >= best_size) return;
            std::size_t t = first_uncovered();
            if (t == nt) {
                best_size = cur.size();
                best_sel = cur;
                return;
            }
            for (std::size_t i = 0; i < nc; ++i) {
                if (!covers[i][t]) continue;
                cur.push_back(i);
                for (std::size_t u = 0; u < nt; ++u) cover_count[u] += covers[i][u];
                rec();
                for (std::size_t u = 0; u < nt; ++u) cover_count[u] -= covers[i][u];
                cur.pop_back();
            }
        };
        rec();
        out.witness.assign(best_sel.begin(), best_sel.begin() + best_size);
    }
    out.count = out.witness.size();
    return out;
}

// ---------------------------------------------------------------------------
// Covering lemmas
// ---------------------------------------------------------------------------

/// Abstract family of closed balls: radii plus a center-distance oracle.
struct BallFamily {
    std::vector<double> radii;
    std::vector<int> radius_index;  // optional Folner index n_i per ball; -1 when unused
    std::function<double(std::size_t, std::size_t)> center_distance;

    std::size_t size() const { return radii.size(); }
};

struct CoverSelection {
    std::vector<std::size_t> selected;
    bool disjoint_verified = false;
    bool coverage_verified = false;
    double coverage_ratio = 1.0;
};

/// Vitali-type selection: greedy in decreasing radius order (index tiebreak).
/// Selected balls are pairwise disjoint (certified via d > r_i + r_j) and
/// their 5-radius enlargements cover the union of the input family (certified
/// via: every dropped ball meets a selected one of no smaller radius).
inline CoverSelection five_r_select(const BallFamily& balls) {
    const std::size_t n = balls.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (balls.radii[a] != balls.radii[b]) return balls.radii[a] > balls.radii[b];
        return a < b;
    });
    CoverSelection out;
    for (std::size_t i : order) {
        bool disjoint = true;
        for (std::size_t j : out.selected) {
            if (balls.center_distance(i, j) <= balls.radii[i] + balls.radii[j]) {
                disjoint = false;
                break;
            }
        }
        if (disjoint) out.selected.push_back(i);
    }

    // re-verify both postconditions from scratch
    out.disjoint_verified = true;
    for (std::size_t a = 0; a < out.selected.size() && out.disjoint_verified; ++a)
        for (std::size_t b = a + 1; b < out.selected.size(); ++b) {
            std::size_t i = out.selected[a], j = out.selected[b];
            if (balls.center_distance(i, j) <= balls.radii[i] + balls.radii[j]) {
                out.disjoint_verified = false;
                break;
            }
        }
    out.coverage_verified = true;
    for (std::size_t i = 0; i < n && out.coverage_verified; ++i) {
        bool covered = false;
        for (std::size_t j : out.selected) {
            // B(c_i, r_i) meets B(c_j, r_j) with r_j >= r_i, so it lies in the
            // 5 r_j enlargement by the triangle inequality
            if (balls.radii[j] >= balls.radii[i] &&
                balls.center_distance(i, j) <= balls.radii[i] + balls.radii[j]) {
                covered = true;
                break;
            }
        }
        if (!covered) out.coverage_verified = false;
    }
    return out;
}

struct DeltaDisjointReport {
    CoverSelection selection;
    std::vector<std::vector<GroupElement>> cores;  // per selected set, greedy-order cores
    double delta = 0.0;
};

/// Maximal greedy subfamily that is delta-disjoint: each kept set, minus the
/// previously kept ones, retains a (1-delta) fraction; those cores are
/// pairwise disjoint by construction and re-verified on output.
inline DeltaDisjointReport delta_disjointify(const std::vector<FiniteSubset>& sets, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta_disjointify: delta in (0,1)");
    std::vector<std::size_t> order(sets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sets[a].size() != sets[b].size()) return sets[a].size() > sets[b].size();
        return a < b;
    });

    DeltaDisjointReport rep;
    rep.delta = delta;
    std::unordered_set<GroupElement, GroupElementHash> taken;
    for (std::size_t i : order) {
        std::vector<GroupElement> core;
        for (const auto& g : sets[i])
            if (!taken.count(g)) core.push_back(g);
        if (static_cast<double>(core.size()) >=
            (1.0 - delta) * static_cast<double>(sets[i].size())) {
            for (const auto& g : core) taken.insert(g);
            rep.selection.selected.push_back(i);
            rep.cores.push_back(std::move(core));
        }
    }
    // certificate: core sizes and pairwise disjointness, recomputed
    rep.selection.disjoint_verified = true;
    std::unordered_set<GroupElement, GroupElementHash> seen;
    for (std::size_t a = 0; a < rep.cores.size(); ++a) {
        if (static_cast<double>(rep.cores[a].size()) <
            (1.0 - delta) * static_cast<double>(sets[rep.selection.selected[a]].size()))
            rep.selection.disjoint_verified = false;
        for (const auto& g : rep.cores[a]) {
            if (!seen.insert(g).second) rep.selection.disjoint_verified = false;
        }
    }
    return rep;
}

struct TranslateId {
    std::size_t i = 0, j = 0;
    GroupElement a;
};

struct LindenstraussReport {
    std::vector<TranslateId> selected;
    CoverSelection selection;  // indices into the flattened candidate list
    double delta = 0.0;
    double delta_quarter = 0.0;
    double disjointness_level = 0.0;  // 10 delta^{1/4}
    double alpha = 0.0;               // min_i |D A_{i,*}| / |F| with D = {e}
    double coverage_ratio = 0.0;
    double coverage_bound = 0.0;  // alpha - delta^{1/4}
    bool coverage_meets_bound = false;
    bool requirement1_ok = false;
    double requirement1_constant = 0.0;  // observed tempered constant per row, maximized
    bool requirement2_ok = false;
    bool hypotheses_ok = false;
};

/// Executable form of the amenable covering lemma: from the translate family
/// {F_{i,j} a : a in A_{i,j}} inside F, select a 10 delta^{1/4}-disjoint
/// subcollection greedily (decreasing size) and report whether the selection
/// covers an (alpha - delta^{1/4}) fraction of F.  The lemma's requirements
/// are checked and reported; they are hypotheses of the guarantee, not of the
/// selection itself.
inline LindenstraussReport lindenstrauss_cover(
    const std::vector<std::vector<FiniteSubset>>& F_array,
    const std::vector<std::vector<FiniteSubset>>& A_array, const FiniteSubset& F, double delta,
    double tempered_constant_budget = 0.0) {
    if (!(delta > 0.0 && delta < 0.01))
        throw std::invalid_argument("lindenstrauss_cover: delta in (0, 1/100)");
    if (F_array.size() != A_array.size() || F_array.empty())
        throw std::invalid_argument("lindenstrauss_cover: array shape mismatch");
    const Group& G = F.group();

    LindenstraussReport rep;
    rep.delta = delta;
    rep.delta_quarter = std::pow(delta, 0.25);
    rep.disjointness_level = 10.0 * rep.delta_quarter;

    // Requirement 1: per-row tempered constant of the F_{i,*} arrays.
    rep.requirement1_constant = 0.0;
    for (const auto& row : F_array) {
        for (std::size_t k = 1; k < row.size(); ++k) {
            std::optional<FiniteSubset> acc;
            for (std::size_t kp = 0; kp < k; ++kp) {
                FiniteSubset term = set_product(row[kp].inverses(), row[k]);
                acc = acc ? set_union(*acc, term) : std::move(term);
            }
            rep.requirement1_constant =
                std::max(rep.requirement1_constant,
                         static_cast<double>(acc->size()) / static_cast<double>(row[k].size()));
        }
    }
    rep.requirement1_ok = tempered_constant_budget <= 0.0 ||
                          rep.requirement1_constant <= tempered_constant_budget;

    // Requirement 2 with D = {e}: |U_{i'<i} F_{i',*}^{-1} F_{i,k}| <= (1+delta)|F_{i,k}|.
    rep.requirement2_ok = true;
    std::vector<FiniteSubset> row_unions;
    for (const auto& row : F_array) {
        std::optional<FiniteSubset> u;
        for (const auto& s : row) u = u ? set_union(*u, s) : s;
        row_unions.push_back(*u);
    }
    for (std::size_t i = 1; i < F_array.size() && rep.requirement2_ok; ++i) {
        for (const auto& Fik : F_array[i]) {
            std::optional<FiniteSubset> acc;
            for (std::size_t ip = 0; ip < i; ++ip) {
                FiniteSubset term = set_product(row_unions[ip].inverses(), Fik);
                acc = acc ? set_union(*acc, term) : std::move(term);
            }
            if (static_cast<double>(acc->size()) >
                (1.0 + delta) * static_cast<double>(Fik.size())) {
                rep.requirement2_ok = false;
                break;
            }
        }
    }
    rep.hypotheses_ok = rep.requirement1_ok && rep.requirement2_ok;

    // alpha = min_i |D A_{i,*}| / |F|, D = {e}
    double min_a = std::numeric_limits<double>::infinity();
    for (const auto& row : A_array) {
        std::optional<FiniteSubset> u;
        for (const auto& s : row) u = u ? set_union(*u, s) : s;
        min_a = std::min(min_a, static_cast<double>(u->size()));
    }
    rep.alpha = min_a / static_cast<double>(F.size());
    rep.coverage_bound = rep.alpha - rep.delta_quarter;

    // candidate translates, with the containment precondition enforced
    struct Candidate {
        TranslateId id;
        FiniteSubset tile;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < F_array.size(); ++i) {
        if (F_array[i].size() != A_array[i].size())
            throw std::invalid_argument("lindenstrauss_cover: row shape mismatch");
        for (std::size_t j = 0; j < F_array[i].size(); ++j) {
            for (const auto& a : A_array[i][j]) {
                FiniteSubset tile = F_array[i][j].right_translate(a);
                if (!tile.is_subset_of(F))
                    throw std::domain_error("lindenstrauss_cover: F_{i,j} A_{i,j} not inside F");
                cands.push_back(Candidate{TranslateId{i, j, a}, std::move(tile)});
            }
        }
    }

    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (cands[a].tile.size() != cands[b].tile.size())
            return cands[a].tile.size() > cands[b].tile.size();
        return a < b;
    });

    const double keep_fraction = std::max(0.0, 1.0 - rep.disjointness_level);
    std::unordered_set<GroupElement, GroupElementHash> taken;
    std::vector<std::vector<GroupElement>> cores;
    for (std::size_t idx : order) {
        std::vector<GroupElement> core;
        for (const auto& g : cands[idx].tile)
            if (!taken.count(g)) core.push_back(g);
        if (static_cast<double>(core.size()) >=
            keep_fraction * static_cast<double>(cands[idx].tile.size())) {
            for (const auto& g : core) taken.insert(g);
            rep.selection.selected.push_back(idx);
            rep.selected.push_back(cands[idx].id);
            cores.push_back(std::move(core));
        }
    }

    // union of the selected tiles (not just cores) for the coverage ratio
    std::unordered_set<GroupElement, GroupElementHash> covered;
    for (std::size_t a = 0; a < rep.selection.selected.size(); ++a)
        for (const auto& g : cands[rep.selection.selected[a]].tile) covered.insert(g);
    rep.coverage_ratio = static_cast<double>(covered.size()) / static_cast<double>(F.size());
    rep.coverage_meets_bound = rep.coverage_ratio >= rep.coverage_bound - 1e-12;

    // 10 delta^{1/4}-disjointness certificate, recomputed
    rep.selection.disjoint_verified = true;
    std::unordered_set<GroupElement, GroupElementHash> seen;
    for (std::size_t a = 0; a < cores.size(); ++a) {
        if (static_cast<double>(cores[a].size()) <
            keep_fraction * static_cast<double>(cands[rep.selection.selected[a]].tile.size()))
            rep.selection.disjoint_verified = false;
        for (const auto& g : cores[a])
            if (!seen.insert(g).second) rep.selection.disjoint_verified = false;
    }
    rep.selection.coverage_verified = rep.coverage_meets_bound;
    rep.selection.coverage_ratio = rep.coverage_ratio;
    return rep;
}

}  // namespace packent
