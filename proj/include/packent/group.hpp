#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace packent {

enum class GroupKind { zd, dihedral };

/// Element of one of the supported groups, kept in canonical form.
///
/// For Z^d (d <= 4) the canonical form is the integer coordinate vector
/// (unused slots stay zero).  For the infinite dihedral group it is the
/// normal form (t, f) = r^t s^f with t in v[0] and f in `flip`.
struct GroupElement {
    std::array<std::int64_t, 4> v{0, 0, 0, 0};
    bool flip = false;

    auto operator<=>(const GroupElement&) const = default;
};

inline GroupElement make_z(std::int64_t x) { return GroupElement{{x, 0, 0, 0}, false}; }

inline GroupElement make_z2(std::int64_t x, std::int64_t y) {
    return GroupElement{{x, y, 0, 0}, false};
}

struct GroupElementHash {
    std::size_t operator()(const GroupElement& g) const noexcept {
        std::uint64_t h = g.flip ? 0x9e3779b97f4a7c15ull : 0x2545f4914f6cdd1dull;
        for (auto c : g.v) {
            h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

/// Group instance: Z^d for d <= 4 or the infinite dihedral group.
/// Dihedral composition follows (t,f)*(t',f') = (t + (-1)^f t', f xor f').
class Group {
  public:
    static Group zd(int dim) {
        if (dim < 1 || dim > 4) throw std::invalid_argument("Group::zd: dim must be in [1,4]");
        return Group(GroupKind::zd, dim);
    }
    static Group z() { return zd(1); }
    static Group dihedral() { return Group(GroupKind::dihedral, 1); }

    GroupKind kind() const { return kind_; }
    int dim() const { return dim_; }

    GroupElement identity() const { return GroupElement{}; }

    GroupElement op(const GroupElement& a, const GroupElement& b) const {
        GroupElement r;
        if (kind_ == GroupKind::zd) {
            for (int i = 0; i < dim_; ++i) r.v[i] = a.v[i] + b.v[i];
        } else {
            r.v[0] = a.v[0] + (a.flip ? -b.v[0] : b.v[0]);
            r.flip = a.flip != b.flip;
        }
        return r;
    }

    GroupElement inverse(const GroupElement& a) const {
        if (kind_ == GroupKind::zd) {
            GroupElement r;
            for (int i = 0; i < dim_; ++i) r.v[i] = -a.v[i];
            return r;
        }
        // reflections are involutions: (t,1)^-1 = (t,1)
        return a.flip ? a : GroupElement{{-a.v[0], 0, 0, 0}, false};
    }

    std::string id() const {
        if (kind_ == GroupKind::dihedral) return "dihedral";
        return dim_ == 1 ? "z" : "z" + std::to_string(dim_);
    }

    std::string format(const GroupElement& g) const {
        std::ostringstream os;
        if (kind_ == GroupKind::dihedral) {
            os << "(" << g.v[0] << (g.flip ? ",s)" : ",e)");
        } else if (dim_ == 1) {
            os << g.v[0];
        } else {
            os << "(";
            for (int i = 0; i < dim_; ++i) os << (i ? "," : "") << g.v[i];
            os << ")";
        }
        return os.str();
    }

    bool operator==(const Group&) const = default;

  private:
    Group(GroupKind k, int d) : kind_(k), dim_(d) {}
    GroupKind kind_;
    int dim_;
};

inline Group group_from_id(const std::string& id) {
    if (id == "z") return Group::z();
    if (id == "z2") return Group::zd(2);
    if (id == "z3") return Group::zd(3);
    if (id == "z4") return Group::zd(4);
    if (id == "dihedral") return Group::dihedral();
    throw std::invalid_argument("unknown group id: " + id);
}

/// Finite subset of a group, materialized as a sorted, deduplicated array.
/// The sort order is lexicographic on the canonical form; pattern rendering
/// and window layouts rely on it being stable.
class FiniteSubset {
  public:
    FiniteSubset(Group g, std::vector<GroupElement> elems)
        : group_(g), elems_(std::move(elems)) {
        std::sort(elems_.begin(), elems_.end());
        elems_.erase(std::unique(elems_.begin(), elems_.end()), elems_.end());
    }

    static FiniteSubset singleton(const Group& g, const GroupElement& e) {
        return FiniteSubset(g, {e});
    }

    const Group& group() const { return group_; }
    std::size_t size() const { return elems_.size(); }
    bool empty() const { return elems_.empty(); }
    const std::vector<GroupElement>& elements() const { return elems_; }
    const GroupElement& operator[](std::size_t i) const { return elems_[i]; }

    auto begin() const { return elems_.begin(); }
    auto end() const { return elems_.end(); }

    bool contains(const GroupElement& g) const {
        return std::binary_search(elems_.begin(), elems_.end(), g);
    }

    /// Index of g in the sorted element array, or npos.
    std::size_t index_of(const GroupElement& g) const {
        auto it = std::lower_bound(elems_.begin(), elems_.end(), g);
        if (it == elems_.end() || *it != g) return npos;
        return static_cast<std::size_t>(it - elems_.begin());
    }

    bool is_subset_of(const FiniteSubset& other) const {
        return std::includes(other.elems_.begin(), other.elems_.end(), elems_.begin(),
                             elems_.end());
    }

    FiniteSubset inverses() const {
        std::vector<GroupElement> out;
        out.reserve(elems_.size());
        for (const auto& e : elems_) out.push_back(group_.inverse(e));
        return FiniteSubset(group_, std::move(out));
    }

    FiniteSubset right_translate(const GroupElement& g) const {
        std::vector<GroupElement> out;
        out.reserve(elems_.size());
        for (const auto& e : elems_) out.push_back(group_.op(e, g));
        return FiniteSubset(group_, std::move(out));
    }

    FiniteSubset left_translate(const GroupElement& g) const {
        std::vector<GroupElement> out;
        out.reserve(elems_.size());
        for (const auto& e : elems_) out.push_back(group_.op(g, e));
        return FiniteSubset(group_, std::move(out));
    }

    friend FiniteSubset set_product(const FiniteSubset& a, const FiniteSubset& b) {
        require_same_group(a, b);
        std::vector<GroupElement> out;
        out.reserve(a.size() * b.size());
        for (const auto& x : a) {
            for (const auto& y : b) out.push_back(a.group_.op(x, y));
        }
        return FiniteSubset(a.group_, std::move(out));
    }

    friend FiniteSubset set_union(const FiniteSubset& a, const FiniteSubset& b) {
        require_same_group(a, b);
        std::vector<GroupElement> out;
        out.reserve(a.size() + b.size());
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        return FiniteSubset(a.group_, std::move(out));
    }

    friend FiniteSubset set_difference(const FiniteSubset& a, const FiniteSubset& b) {
        require_same_group(a, b);
        std::vector<GroupElement> out;
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        return FiniteSubset(a.group_, std::move(out));
    }

    friend FiniteSubset set_intersection(const FiniteSubset& a, const FiniteSubset& b) {
        require_same_group(a, b);
        std::vector<GroupElement> out;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        return FiniteSubset(a.group_, std::move(out));
    }

    bool operator==(const FiniteSubset& other) const {
        return group_ == other.group_ && elems_ == other.elems_;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  private:
    static void require_same_group(const FiniteSubset& a, const FiniteSubset& b) {
        if (!(a.group_ == b.group_))
            throw std::invalid_argument("FiniteSubset: operands live in different groups");
    }

    Group group_;
    std::vector<GroupElement> elems_;
};

/// Interval [lo, hi] in Z as a FiniteSubset.
inline FiniteSubset z_interval(std::int64_t lo, std::int64_t hi) {
    std::vector<GroupElement> e;
    for (std::int64_t x = lo; x <= hi; ++x) e.push_back(make_z(x));
    return FiniteSubset(Group::z(), std::move(e));
}

/// Centered box [-n,n]^d in Z^d.
inline FiniteSubset zd_centered_box(const Group& g, int n) {
    if (g.kind() != GroupKind::zd) throw std::invalid_argument("zd_centered_box: not Z^d");
    std::vector<GroupElement> out;
    const int d = g.dim();
    std::array<std::int64_t, 4> c;
    c.fill(-n);
    while (true) {
        GroupElement e;
        for (int i = 0; i < d; ++i) e.v[i] = c[i];
        out.push_back(e);
        int i = 0;
        for (; i < d; ++i) {
            if (++c[i] <= n) break;
            c[i] = -n;
        }
        if (i == d) break;
    }
    return FiniteSubset(g, std::move(out));
}

/// Word-length ball of radius n in the infinite dihedral group, generators
/// {r, r^-1, s}: wl((t,0)) = |t|, wl((t,1)) = |t| + 1.
inline FiniteSubset dihedral_ball(int n) {
    std::vector<GroupElement> out;
    for (std::int64_t t = -n; t <= n; ++t) out.push_back(GroupElement{{t, 0, 0, 0}, false});
    for (std::int64_t t = -(n - 1); t <= n - 1; ++t)
        out.push_back(GroupElement{{t, 0, 0, 0}, true});
    return FiniteSubset(Group::dihedral(), std::move(out));
}

}  // namespace packent
