#include "transim/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>

namespace transim {

template <typename T>
SparseMatrix<T> SparseMatrix<T>::from_triplets(Index dimension, std::span<const Triplet<T>> entries,
                                               bool ensure_diagonal, bool symmetric_pattern) {
    if (dimension <= 0) {
        throw Error(ErrorCode::DimensionMismatch, "sparse matrix dimension must be positive");
    }
    std::vector<Triplet<T>> all(entries.begin(), entries.end());
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= dimension || t.col < 0 || t.col >= dimension) {
            throw Error(ErrorCode::DimensionMismatch,
                        "entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                            ") outside dimension " + std::to_string(dimension));
        }
        if (symmetric_pattern && t.row != t.col) {
            all.push_back({t.col, t.row, T{}});
        }
    }
    if (ensure_diagonal) {
        for (Index i = 0; i < dimension; ++i) {
            all.push_back({i, i, T{}});
        }
    }
    // stable so that summation order of duplicates follows input order
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseMatrix m;
    m.dimension_ = dimension;
    m.row_ptr_.assign(static_cast<std::size_t>(dimension) + 1, 0);
    for (std::size_t k = 0; k < all.size();) {
        const Index r = all[k].row;
        const Index c = all[k].col;
        T sum{};
        for (; k < all.size() && all[k].row == r && all[k].col == c; ++k) {
            sum += all[k].value;
        }
        m.col_idx_.push_back(c);
        m.values_.push_back(sum);
        ++m.row_ptr_[static_cast<std::size_t>(r) + 1];
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
}

template <typename T>
T SparseMatrix<T>::at(Index row, Index col) const {
    const auto first = col_idx_.begin() + row_ptr_[row];
    const auto last = col_idx_.begin() + row_ptr_[row + 1];
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) {
        return T{};
    }
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

template <typename T>
bool SparseMatrix<T>::contains(Index row, Index col) const {
    const auto first = col_idx_.begin() + row_ptr_[row];
    const auto last = col_idx_.begin() + row_ptr_[row + 1];
    return std::binary_search(first, last, col);
}

template <typename T>
std::vector<T> SparseMatrix<T>::multiply(std::span<const T> x) const {
    if (static_cast<Index>(x.size()) != dimension_) {
        throw Error(ErrorCode::DimensionMismatch, "vector length " + std::to_string(x.size()) +
                                                      " != dimension " + std::to_string(dimension_));
    }
    std::vector<T> y(x.size(), T{});
    for (Index i = 0; i < dimension_; ++i) {
        T acc{};
        for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            acc += values_[p] * x[col_idx_[p]];
        }
        y[i] = acc;
    }
    return y;
}

template <typename T>
std::vector<Triplet<T>> SparseMatrix<T>::triplets() const {
    std::vector<Triplet<T>> out;
    out.reserve(values_.size());
    for (Index i = 0; i < dimension_; ++i) {
        for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            out.push_back({i, col_idx_[p], values_[p]});
        }
    }
    return out;
}

namespace {

std::vector<std::vector<Index>> symmetric_adjacency(std::span<const Index> row_ptr, std::span<const Index> col_idx,
                                                    Index n) {
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        for (Index p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            const Index j = col_idx[p];
            if (j != i) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    }
    for (auto& row : adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return adj;
}

// Eliminates `v` from the elimination graph: its neighbours become a clique.
// Returns the number of undirected edges created.
std::size_t eliminate_node(std::vector<std::vector<Index>>& adj, Index v,
                           const std::vector<char>& eliminated, std::vector<Index>& scratch) {
    std::size_t created = 0;
    const auto& nbrs = adj[v];
    for (const Index u : nbrs) {
        auto& au = adj[u];
        scratch.clear();
        std::set_union(au.begin(), au.end(), nbrs.begin(), nbrs.end(), std::back_inserter(scratch));
        scratch.erase(std::remove_if(scratch.begin(), scratch.end(),
                                     [&](Index w) { return w == u || w == v || eliminated[w]; }),
                      scratch.end());
        // au minus v and eliminated nodes, for the created-edge count
        std::size_t before = 0;
        for (const Index w : au) {
            if (w != v && !eliminated[w]) {
                ++before;
            }
        }
        created += scratch.size() - before;
        au.swap(scratch);
    }
    // every new edge (u,w) was counted from both endpoints
    return created / 2;
}

}  // namespace

template <typename T>
std::vector<Index> minimum_degree_order(const SparseMatrix<T>& a) {
    const Index n = a.dimension();
    auto adj = symmetric_adjacency(a.row_ptr(), a.col_idx(), n);
    std::vector<char> eliminated(static_cast<std::size_t>(n), 0);
    std::set<std::pair<std::size_t, Index>> queue;
    for (Index i = 0; i < n; ++i) {
        queue.emplace(adj[i].size(), i);
    }
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    std::vector<Index> scratch;
    while (!queue.empty()) {
        const Index v = queue.begin()->second;
        queue.erase(queue.begin());
        eliminated[v] = 1;
        order.push_back(v);
        for (const Index u : adj[v]) {
            queue.erase({adj[u].size(), u});
        }
        eliminate_node(adj, v, eliminated, scratch);
        for (const Index u : adj[v]) {
            queue.emplace(adj[u].size(), u);
        }
    }
    return order;
}

template <typename T>
SymbolicFactor symbolic_factorize(const SparseMatrix<T>& a, std::span<const Index> permutation) {
    const Index n = a.dimension();
    if (static_cast<Index>(permutation.size()) != n) {
        throw Error(ErrorCode::DimensionMismatch, "permutation length does not match matrix dimension");
    }
    SymbolicFactor sym;
    sym.permutation.assign(permutation.begin(), permutation.end());
    sym.inverse.assign(static_cast<std::size_t>(n), -1);
    for (Index k = 0; k < n; ++k) {
        const Index old = permutation[k];
        if (old < 0 || old >= n || sym.inverse[old] != -1) {
            throw Error(ErrorCode::InvalidArgument, "ordering is not a permutation");
        }
        sym.inverse[old] = k;
    }
    auto adj = symmetric_adjacency(a.row_ptr(), a.col_idx(), n);
    std::vector<char> eliminated(static_cast<std::size_t>(n), 0);
    std::vector<Index> scratch;
    sym.upper_pattern.resize(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        const Index v = permutation[k];
        eliminated[v] = 1;
        auto& row = sym.upper_pattern[k];
        row.push_back(k);
        for (const Index u : adj[v]) {
            row.push_back(sym.inverse[u]);
        }
        std::sort(row.begin(), row.end());
        sym.fill_in_count += eliminate_node(adj, v, eliminated, scratch);
    }
    return sym;
}

template <typename T>
LuFactors<T> order_and_factorize(const SparseMatrix<T>& a, Ordering ordering) {
    const Index n = a.dimension();
    std::vector<Index> perm;
    if (ordering == Ordering::MinimumDegree) {
        perm = minimum_degree_order(a);
    } else {
        perm.resize(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
    }
    const SymbolicFactor sym = symbolic_factorize(a, perm);

    LuFactors<T> lu;
    lu.dimension_ = n;
    lu.permutation_ = sym.permutation;
    lu.fill_in_count_ = sym.fill_in_count;

    // lower pattern by rows = transpose of the strict upper pattern
    std::vector<std::vector<Index>> lower_rows(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        for (const Index j : sym.upper_pattern[k]) {
            if (j != k) {
                lower_rows[j].push_back(k);
            }
        }
    }

    lu.u_diag_.resize(static_cast<std::size_t>(n));
    std::vector<T> work(static_cast<std::size_t>(n), T{});
    const auto row_ptr = a.row_ptr();
    const auto col_idx = a.col_idx();
    const auto values = a.values();
    for (Index i = 0; i < n; ++i) {
        const Index old = sym.permutation[i];
        for (Index p = row_ptr[old]; p < row_ptr[old + 1]; ++p) {
            work[sym.inverse[col_idx[p]]] += values[p];
        }
        for (const Index k : lower_rows[i]) {  // ascending by construction
            const T l = work[k] / lu.u_diag_[k];
            work[k] = T{};
            lu.l_idx_.push_back(k);
            lu.l_val_.push_back(l);
            for (Index q = lu.u_ptr_[k]; q < lu.u_ptr_[k + 1]; ++q) {
                work[lu.u_idx_[q]] -= l * lu.u_val_[q];
            }
        }
        lu.l_ptr_.push_back(static_cast<Index>(lu.l_idx_.size()));

        const T pivot = work[i];
        work[i] = T{};
        if (std::abs(pivot) < kPivotTolerance) {
            throw Error(ErrorCode::SingularMatrix, "zero pivot at original node " + std::to_string(old) +
                                                       " (elimination step " + std::to_string(i) + ")");
        }
        lu.u_diag_[i] = pivot;
        for (const Index j : sym.upper_pattern[i]) {
            if (j != i) {
                lu.u_idx_.push_back(j);
                lu.u_val_.push_back(work[j]);
                work[j] = T{};
            }
        }
        lu.u_ptr_.push_back(static_cast<Index>(lu.u_idx_.size()));
    }
    return lu;
}

template <typename T>
void LuFactors<T>::solve_into(std::span<const T> rhs, std::span<T> x, std::vector<T>& work) const {
    if (static_cast<Index>(rhs.size()) != dimension_ || static_cast<Index>(x.size()) != dimension_) {
        throw Error(ErrorCode::DimensionMismatch, "right-hand side length " + std::to_string(rhs.size()) +
                                                      " != dimension " + std::to_string(dimension_));
    }
    work.resize(static_cast<std::size_t>(dimension_));
    for (Index i = 0; i < dimension_; ++i) {
        T acc = rhs[permutation_[i]];
        for (Index p = l_ptr_[i]; p < l_ptr_[i + 1]; ++p) {
            acc -= l_val_[p] * work[l_idx_[p]];
        }
        work[i] = acc;
    }
    for (Index i = dimension_ - 1; i >= 0; --i) {
        T acc = work[i];
        for (Index p = u_ptr_[i]; p < u_ptr_[i + 1]; ++p) {
            acc -= u_val_[p] * work[u_idx_[p]];
        }
        work[i] = acc / u_diag_[i];
    }
    for (Index i = 0; i < dimension_; ++i) {
        x[permutation_[i]] = work[i];
    }
}

template <typename T>
std::vector<T> LuFactors<T>::solve(std::span<const T> rhs) const {
    std::vector<T> x(rhs.size());
    std::vector<T> work;
    solve_into(rhs, x, work);
    return x;
}

template <typename T>
SparseMatrix<T> LuFactors<T>::lower() const {
    std::vector<Triplet<T>> t;
    for (Index i = 0; i < dimension_; ++i) {
        for (Index p = l_ptr_[i]; p < l_ptr_[i + 1]; ++p) {
            t.push_back({i, l_idx_[p], l_val_[p]});
        }
        t.push_back({i, i, T{1}});
    }
    return SparseMatrix<T>::from_triplets(dimension_, t, true, false);
}

template <typename T>
SparseMatrix<T> LuFactors<T>::upper() const {
    std::vector<Triplet<T>> t;
    for (Index i = 0; i < dimension_; ++i) {
        t.push_back({i, i, u_diag_[i]});
        for (Index p = u_ptr_[i]; p < u_ptr_[i + 1]; ++p) {
            t.push_back({i, u_idx_[p], u_val_[p]});
        }
    }
    return SparseMatrix<T>::from_triplets(dimension_, t, true, false);
}

#define TRANSIM_INSTANTIATE(T)                                                                     \
    template class SparseMatrix<T>;                                                                \
    template class LuFactors<T>;                                                                   \
    template std::vector<Index> minimum_degree_order<T>(const SparseMatrix<T>&);                   \
    template SymbolicFactor symbolic_factorize<T>(const SparseMatrix<T>&, std::span<const Index>); \
    template LuFactors<T> order_and_factorize<T>(const SparseMatrix<T>&, Ordering);

TRANSIM_INSTANTIATE(Real)
TRANSIM_INSTANTIATE(Complex)

#undef TRANSIM_INSTANTIATE

}  // namespace transim
