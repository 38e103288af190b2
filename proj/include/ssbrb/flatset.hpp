#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace ssbrb {

/// Sorted-vector set with the handful of std::set operations the
/// record types need. Record sets stay tiny (a few entries per peer),
/// so contiguous storage wins on every copy and scan. Iterators are
/// const; inserting invalidates them.
template <class T>
class FlatSet {
public:
    using const_iterator = typename std::vector<T>::const_iterator;
    using iterator = const_iterator;

    FlatSet() = default;
    FlatSet(std::initializer_list<T> xs) {
        for (const auto& x : xs) insert(x);
    }

    const_iterator begin() const { return v_.begin(); }
    const_iterator end() const { return v_.end(); }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }
    void clear() { v_.clear(); }

    std::pair<const_iterator, bool> insert(const T& x) {
        auto it = std::lower_bound(v_.begin(), v_.end(), x);
        if (it != v_.end() && *it == x) return {it, false};
        return {v_.insert(it, x), true};
    }

    template <class It>
    void insert(It first, It last) {
        for (; first != last; ++first) insert(*first);
    }

    std::size_t count(const T& x) const {
        return std::binary_search(v_.begin(), v_.end(), x) ? 1 : 0;
    }

    const_iterator lower_bound(const T& x) const {
        return std::lower_bound(v_.begin(), v_.end(), x);
    }

    const_iterator erase(const_iterator it) { return v_.erase(it); }
    const_iterator erase(const_iterator first, const_iterator last) {
        return v_.erase(first, last);
    }

    bool operator==(const FlatSet&) const = default;

private:
    std::vector<T> v_;
};

}  // namespace ssbrb
