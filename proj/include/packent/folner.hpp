#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

#include "packent/group.hpp"

namespace packent {

/// One Folner family over a fixed group, materialized eagerly per index and
/// cached.  Built-in families:
///
///   "z:box" / "z2:box" / ... : centered boxes [-n,n]^d, F_0 = {e}
///   "z:interval"             : one-sided intervals [0,n-1], first index 1
///   "dihedral:ball"          : word-length balls, F_0 = {e}
///
/// Custom generator-backed sequences are supported for diagnostics of
/// artificial families.
class FolnerSequence {
  public:
    using Generator = std::function<FiniteSubset(int)>;

    static FolnerSequence centered_boxes(Group g) {
        if (g.kind() != GroupKind::zd)
            throw std::invalid_argument("centered_boxes: group must be Z^d");
        FolnerSequence seq(g, g.id() + ":box", 0, /*exhausting=*/true, /*regular=*/true);
        seq.gen_ = [g](int n) { return zd_centered_box(g, n); };
        return seq;
    }

    static FolnerSequence one_sided_intervals() {
        FolnerSequence seq(Group::z(), "z:interval", 1, /*exhausting=*/false,
                           /*regular=*/false);
        seq.gen_ = [](int n) { return z_interval(0, n - 1); };
        return seq;
    }

    static FolnerSequence dihedral_balls() {
        FolnerSequence seq(Group::dihedral(), "dihedral:ball", 0, /*exhausting=*/true,
                           /*regular=*/true);
        seq.gen_ = [](int n) { return dihedral_ball(n); };
        return seq;
    }

    static FolnerSequence custom(Group g, Generator gen, std::string id, int min_index,
                                 bool exhausting, bool regular_hint) {
        FolnerSequence seq(std::move(g), std::move(id), min_index, exhausting, regular_hint);
        seq.gen_ = std::move(gen);
        return seq;
    }

    const Group& group() const { return group_; }
    const std::string& family_id() const { return id_; }
    int min_index() const { return min_index_; }

    /// True when U_n F_n = G; the cylinder metric requires this.
    bool exhausting() const { return exhausting_; }
    /// Family-level expectation F_m F_n <= F_{m+n}; verified, not trusted,
    /// by regular_system_check.
    bool regular_system_hint() const { return regular_hint_; }

    const FiniteSubset& set(int n) const {
        if (n < min_index_) throw std::out_of_range("FolnerSequence::set: index below family minimum");
        std::lock_guard<std::mutex> lock(cache_->mu);
        auto idx = static_cast<std::size_t>(n - min_index_);
        if (idx >= cache_->sets.size()) cache_->sets.resize(idx + 1);
        if (!cache_->sets[idx]) cache_->sets[idx] = std::make_shared<FiniteSubset>(gen_(n));
        return *cache_->sets[idx];
    }

    std::size_t size(int n) const {
        if (n < min_index_) throw std::out_of_range("FolnerSequence::size: index below family minimum");
        if (id_.size() > 4 && id_.compare(id_.size() - 4, 4, ":box") == 0) {
            std::size_t s = 1;
            for (int i = 0; i < group_.dim(); ++i) s *= static_cast<std::size_t>(2 * n + 1);
            return s;
        }
        if (id_ == "z:interval") return static_cast<std::size_t>(n);
        if (id_ == "dihedral:ball") return n == 0 ? 1 : static_cast<std::size_t>(4 * n);
        return set(n).size();
    }

    /// F_n \ F_{n-1}; at the first index this is all of F_n.  Fast paths for
    /// the built-in families keep deep traces linear in |F_n|.
    FiniteSubset delta(int n) const {
        if (n == min_index_) return set(n);
        if (id_ == "z:box") {
            return FiniteSubset(group_, {make_z(-n), make_z(n)});
        }
        if (id_ == "z:interval") {
            return FiniteSubset(group_, {make_z(n - 1)});
        }
        if (id_ == "dihedral:ball") {
            return FiniteSubset(group_, {GroupElement{{-n, 0, 0, 0}, false},
                                         GroupElement{{n, 0, 0, 0}, false},
                                         GroupElement{{-(n - 1), 0, 0, 0}, true},
                                         GroupElement{{n - 1, 0, 0, 0}, true}});
        }
        return set_difference(set(n), set(n - 1));
    }

    bool member(const GroupElement& g, int n) const {
        if (id_.size() > 4 && id_.compare(id_.size() - 4, 4, ":box") == 0) {
            for (int i = 0; i < group_.dim(); ++i)
                if (g.v[i] < -n || g.v[i] > n) return false;
            return !g.flip;
        }
        if (id_ == "z:interval") return !g.flip && g.v[0] >= 0 && g.v[0] < n;
        if (id_ == "dihedral:ball") {
            auto wl = std::abs(g.v[0]) + (g.flip ? 1 : 0);
            return wl <= n;
        }
        return set(n).contains(g);
    }

  private:
    FolnerSequence(Group g, std::string id, int min_index, bool exhausting, bool regular)
        : group_(std::move(g)),
          id_(std::move(id)),
          min_index_(min_index),
          exhausting_(exhausting),
          regular_hint_(regular),
          cache_(std::make_shared<Cache>()) {}

    struct Cache {
        std::mutex mu;
        std::vector<std::shared_ptr<FiniteSubset>> sets;
    };

    Group group_;
    std::string id_;
    int min_index_;
    bool exhausting_;
    bool regular_hint_;
    Generator gen_;
    std::shared_ptr<Cache> cache_;
};

/// Parse "z:box", "z2:box", "z:interval", "dihedral:ball".
inline FolnerSequence make_folner(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("folner spec must look like group:family, got " + spec);
    const std::string gid = spec.substr(0, colon);
    const std::string fam = spec.substr(colon + 1);
    if (fam == "box") return FolnerSequence::centered_boxes(group_from_id(gid));
    if (fam == "interval") {
        if (gid != "z") throw std::invalid_argument("interval family is Z-only");
        return FolnerSequence::one_sided_intervals();
    }
    if (fam == "ball") {
        if (gid != "dihedral") throw std::invalid_argument("ball family is dihedral-only");
        return FolnerSequence::dihedral_balls();
    }
    throw std::invalid_argument("unknown folner family: " + spec);
}

/// K-boundary B(A,K) = {g : Kg meets both A and its complement}.
/// Candidates are exactly g in K^-1 A.
inline FiniteSubset k_boundary(const FiniteSubset& A, const FiniteSubset& K) {
    if (A.empty() || K.empty()) throw std::invalid_argument("k_boundary: A and K must be non-empty");
    if (!(A.group() == K.group()))
        throw std::invalid_argument("k_boundary: A and K must share a group");
    const Group& G = A.group();
    FiniteSubset candidates = set_product(K.inverses(), A);
    std::vector<GroupElement> out;
    for (const auto& g : candidates) {
        bool meets_A = false, meets_complement = false;
        for (const auto& k : K) {
            if (A.contains(G.op(k, g)))
                meets_A = true;
            else
                meets_complement = true;
            if (meets_A && meets_complement) break;
        }
        if (meets_A && meets_complement) out.push_back(g);
    }
    return FiniteSubset(G, std::move(out));
}

/// |B(A,K)| / |A|; A is (K,delta)-invariant when this is below delta.
inline double invariance_defect(const FiniteSubset& A, const FiniteSubset& K) {
    return static_cast<double>(k_boundary(A, K).size()) / static_cast<double>(A.size());
}

/// Largest prefix ratio |U_{k<n} F_k^-1 F_n| / |F_n| for 2 <= n <= n_max: a
/// lower witness for the tempered constant C of the Shulman condition.
inline double tempered_prefix_constant(const FolnerSequence& seq, int n_max) {
    if (n_max < 2) throw std::invalid_argument("tempered_prefix_constant: n_max >= 2 required");
    double best = 0.0;
    for (int n = std::max(2, seq.min_index() + 1); n <= n_max; ++n) {
        std::optional<FiniteSubset> acc;
        for (int k = seq.min_index(); k < n; ++k) {
            FiniteSubset term = set_product(seq.set(k).inverses(), seq.set(n));
            acc = acc ? set_union(*acc, term) : std::move(term);
        }
        best = std::max(best, static_cast<double>(acc->size()) /
                                  static_cast<double>(seq.size(n)));
    }
    return best;
}

struct GrowthDiagnostic {
    std::vector<int> indices;
    std::vector<double> ratios;  // |F_n| / log n
    bool monotone_tail = false;  // nondecreasing over the last half
};

inline GrowthDiagnostic growth_diagnostic(const FolnerSequence& seq, int n_max) {
    if (n_max < 2) throw std::invalid_argument("growth_diagnostic: n_max >= 2 required");
    GrowthDiagnostic out;
    for (int n = std::max(2, seq.min_index()); n <= n_max; ++n) {
        out.indices.push_back(n);
        out.ratios.push_back(static_cast<double>(seq.size(n)) / std::log(static_cast<double>(n)));
    }
    const std::size_t half = out.ratios.size() / 2;
    out.monotone_tail = true;
    for (std::size_t i = half + 1; i < out.ratios.size(); ++i) {
        if (out.ratios[i] < out.ratios[i - 1]) {
            out.monotone_tail = false;
            break;
        }
    }
    return out;
}

struct RegularSystemReport {
    bool product_ok = true;
    // witness of the first failure of F_m F_n <= F_{m+n}
    int witness_m = -1, witness_n = -1;
    std::optional<GroupElement> witness_g;
    std::vector<double> ratio_trace;  // |F_{n+1}| / |F_n|
    /// Heuristic flag for Prop-5.4-style use: products nest and the last
    /// tested ratio is within 25% of 1.  Reported, never proved.
    bool ratio_near_one = false;
};

inline RegularSystemReport regular_system_check(const FolnerSequence& seq, int m_max) {
    if (m_max < 1) throw std::invalid_argument("regular_system_check: m_max >= 1 required");
    RegularSystemReport rep;
    const int lo = std::max(1, seq.min_index());
    for (int m = lo; m <= m_max && rep.product_ok; ++m) {
        for (int n = lo; m + n <= m_max && rep.product_ok; ++n) {
            const FiniteSubset prod = set_product(seq.set(m), seq.set(n));
            const FiniteSubset& target = seq.set(m + n);
            for (const auto& g : prod) {
                if (!target.contains(g)) {
                    rep.product_ok = false;
                    rep.witness_m = m;
                    rep.witness_n = n;
                    rep.witness_g = g;
                    break;
                }
            }
        }
    }
    for (int n = seq.min_index(); n < m_max; ++n) {
        rep.ratio_trace.push_back(static_cast<double>(seq.size(n + 1)) /
                                  static_cast<double>(seq.size(n)));
    }
    rep.ratio_near_one =
        rep.product_ok && !rep.ratio_trace.empty() && std::abs(rep.ratio_trace.back() - 1.0) <= 0.25;
    return rep;
}

}  // namespace packent
