#include "otcurve/linear_system.hpp"

#include <cmath>
#include <sstream>

namespace otcurve {

template <typename F>
void LinearSystem::for_each_row_entry(Index ell, F&& f) const {
  for (const Block& blk : blocks_) {
    f(blk.offset + grid_.index_of(ell, blk.axis), 1.0);
  }
  for (Index k = row_ptr_[ell]; k < row_ptr_[ell + 1]; ++k) {
    f(constraint_offset_ + row_cons_[k], row_val_[k]);
  }
}

double LinearSystem::row_dot(Index ell, const Vector& phi) const {
  double s = 0.0;
  for_each_row_entry(ell, [&](Index c, double v) {
    Index kc = kept_of_full_[c];
    if (kc >= 0) s += v * phi[kc];
  });
  return s;
}

void LinearSystem::add_row_scaled(Index ell, double w, Vector& acc) const {
  for_each_row_entry(ell, [&](Index c, double v) {
    Index kc = kept_of_full_[c];
    if (kc >= 0) acc[kc] += w * v;
  });
}

void LinearSystem::add_row_outer(Index ell, double w, Matrix& acc) const {
  thread_local std::vector<Index> cols;
  thread_local std::vector<double> vals;
  cols.clear();
  vals.clear();
  for_each_row_entry(ell, [&](Index c, double v) {
    Index kc = kept_of_full_[c];
    if (kc >= 0) {
      cols.push_back(kc);
      vals.push_back(v);
    }
  });
  const size_t nz = cols.size();
  for (size_t a = 0; a < nz; ++a) {
    for (size_t b = 0; b < nz; ++b) acc(cols[a], cols[b]) += w * vals[a] * vals[b];
  }
}

Vector LinearSystem::apply_transpose(const Vector& gamma) const {
  Vector out = Vector::Zero(cols());
  for (Index ell = 0; ell < rows(); ++ell) add_row_scaled(ell, gamma[ell], out);
  return out;
}

Matrix LinearSystem::dense() const {
  Matrix a = Matrix::Zero(rows(), cols());
  for (Index ell = 0; ell < rows(); ++ell) {
    for_each_row_entry(ell, [&](Index c, double v) {
      Index kc = kept_of_full_[c];
      if (kc >= 0) a(ell, kc) += v;
    });
  }
  return a;
}

void LinearSystem::full_column_dense(Index full_col, Vector& out) const {
  out.setZero(rows());
  if (full_col >= constraint_offset_) {
    Index j = full_col - constraint_offset_;
    // locate the owning basis entries via CSR scan is wasteful; columns are
    // requested rarely (reduction only), so scan rows once.
    for (Index ell = 0; ell < rows(); ++ell) {
      for (Index k = row_ptr_[ell]; k < row_ptr_[ell + 1]; ++k) {
        if (row_cons_[k] == j) out[ell] += row_val_[k];
      }
    }
    return;
  }
  for (const Block& blk : blocks_) {
    if (full_col >= blk.offset && full_col < blk.offset + blk.size) {
      Index q = full_col - blk.offset;
      Index stride = grid_.stride(blk.axis);
      Index repeat = grid_.size() / (stride * blk.size);
      for (Index outer = 0; outer < repeat; ++outer) {
        Index base = (outer * blk.size + q) * stride;
        for (Index inner = 0; inner < stride; ++inner) out[base + inner] = 1.0;
      }
      return;
    }
  }
  throw std::logic_error("column index out of range");
}

void LinearSystem::gauge_project(Vector& phi_full) const {
  if (phi_full.size() != nfull_) throw std::invalid_argument("gauge_project: bad potential length");
  for (const Dropped& d : dropped_) {
    double a = phi_full[d.full_col];
    if (a == 0.0) continue;
    for (size_t k = 0; k < d.kept_cols.size(); ++k) {
      phi_full[full_of_kept_[d.kept_cols[k]]] += a * d.coeff[k];
    }
    phi_full[d.full_col] = 0.0;
  }
}

Vector LinearSystem::reduce_potentials(Vector phi_full) const {
  gauge_project(phi_full);
  Vector out(cols());
  for (Index k = 0; k < cols(); ++k) out[k] = phi_full[full_of_kept_[k]];
  return out;
}

Vector LinearSystem::embed_potentials(const Vector& phi_kept) const {
  if (phi_kept.size() != cols()) throw std::invalid_argument("embed_potentials: bad length");
  Vector out = Vector::Zero(nfull_);
  for (Index k = 0; k < cols(); ++k) out[full_of_kept_[k]] = phi_kept[k];
  return out;
}

LinearSystem build_system(const std::vector<DiscreteMarginal>& marginals,
                          const std::vector<bool>& free_flags,
                          const ConstraintBasis& basis) {
  if (marginals.size() != free_flags.size())
    throw std::invalid_argument("build_system: marginals/free_flags size mismatch");
  LinearSystem sys;
  std::vector<Index> sizes;
  for (const auto& mu : marginals) {
    mu.validate();
    sizes.push_back(mu.size());
  }
  sys.grid_ = ProductGrid(sizes);

  Index off = 0;
  bool any_constrained = false;
  for (int i = 0; i < static_cast<int>(marginals.size()); ++i) {
    if (free_flags[i]) continue;
    any_constrained = true;
    sys.blocks_.push_back({i, i, marginals[i].size(), off});
    off += marginals[i].size();
  }
  if (!any_constrained) throw std::invalid_argument("build_system: at least one constrained marginal required");

  sys.constraint_offset_ = off;
  sys.k_ = basis.size();
  sys.nfull_ = off + sys.k_;

  const Index m = sys.grid_.size();
  if (sys.k_ > 0 && basis.m != m) throw std::invalid_argument("inconsistent basis");

  // CSR of constraint entries by row
  std::vector<Index> count(m, 0);
  for (const auto& q : basis.vectors) {
    for (Index k = 0; k < q.nnz(); ++k) {
      if (q.idx[k] < 0 || q.idx[k] >= m) throw std::invalid_argument("inconsistent basis");
      ++count[q.idx[k]];
    }
  }
  sys.row_ptr_.assign(m + 1, 0);
  for (Index ell = 0; ell < m; ++ell) sys.row_ptr_[ell + 1] = sys.row_ptr_[ell] + count[ell];
  sys.row_cons_.resize(sys.row_ptr_[m]);
  sys.row_val_.resize(sys.row_ptr_[m]);
  std::vector<Index> cursor(sys.row_ptr_.begin(), sys.row_ptr_.end() - 1);
  for (Index j = 0; j < sys.k_; ++j) {
    const auto& q = basis.vectors[j];
    for (Index k = 0; k < q.nnz(); ++k) {
      Index ell = q.idx[k];
      sys.row_cons_[cursor[ell]] = j;
      sys.row_val_[cursor[ell]] = q.val[k];
      ++cursor[ell];
    }
  }

  sys.b_full_.resize(sys.nfull_);
  sys.labels_.resize(sys.nfull_);
  for (const auto& blk : sys.blocks_) {
    for (Index q = 0; q < blk.size; ++q) {
      sys.b_full_[blk.offset + q] = marginals[blk.marginal].weights[q];
      std::ostringstream os;
      os << "psi[" << blk.marginal << "][" << q << "]";
      sys.labels_[blk.offset + q] = os.str();
    }
  }
  for (Index j = 0; j < sys.k_; ++j) {
    sys.b_full_[sys.constraint_offset_ + j] = 0.0;
    sys.labels_[sys.constraint_offset_ + j] =
        j < static_cast<Index>(basis.labels.size()) ? basis.labels[j] : ("q[" + std::to_string(j) + "]");
  }

  sys.kept_of_full_.resize(sys.nfull_);
  sys.full_of_kept_.resize(sys.nfull_);
  for (Index c = 0; c < sys.nfull_; ++c) {
    sys.kept_of_full_[c] = c;
    sys.full_of_kept_[c] = c;
  }
  sys.b_kept_ = sys.b_full_;
  sys.reduced_ = false;
  return sys;
}

namespace {

// Incremental Cholesky of the Gram matrix of the kept columns, in extended
// precision. Returns squared projection residual of the candidate column.
class GreedyRank {
 public:
  explicit GreedyRank(Index max_cols) : n_(max_cols), r_(max_cols * max_cols, 0.0L) {}

  // g = inner products of candidate with kept columns, gjj = candidate self
  // inner product. Fills y (length kept) with R^{-T} g.
  long double residual2(const std::vector<long double>& g, long double gjj,
                        std::vector<long double>& y) const {
    y.resize(kept_);
    long double acc = gjj;
    for (Index i = 0; i < kept_; ++i) {
      long double s = g[i];
      const long double* col = &r_[i * n_];
      for (Index k = 0; k < i; ++k) s -= col[k] * y[k];
      y[i] = s / col[i];
      acc -= y[i] * y[i];
    }
    return acc;
  }

  void append(const std::vector<long double>& y, long double res2) {
    long double* col = &r_[kept_ * n_];
    for (Index k = 0; k < kept_; ++k) col[k] = y[k];
    col[kept_] = std::sqrt(res2 > 0.0L ? res2 : 0.0L);
    ++kept_;
  }

  // Expansion x of a dependent column on the kept ones: R x = y.
  std::vector<double> expand(const std::vector<long double>& y) const {
    std::vector<long double> x(kept_);
    for (Index i = kept_ - 1; i >= 0; --i) {
      long double s = y[i];
      for (Index k = i + 1; k < kept_; ++k) s -= r_[k * n_ + i] * x[k];
      x[i] = s / r_[i * n_ + i];
    }
    return std::vector<double>(x.begin(), x.end());
  }

  Index kept() const { return kept_; }

 private:
  Index n_;
  Index kept_ = 0;
  std::vector<long double> r_;  // column-major upper factor
};

}  // namespace

LinearSystem reduce_full_rank(const LinearSystem& sys) {
  LinearSystem out = sys;
  const Index m = sys.rows();
  const Index p = sys.cols();  // candidates = currently kept columns, in order

  // Gram matrix of the candidate columns (extended precision accumulation;
  // rows contribute tiny rank-one updates).
  std::vector<long double> gram(static_cast<size_t>(p) * p, 0.0L);
  {
    std::vector<Index> cols;
    std::vector<double> vals;
    for (Index ell = 0; ell < m; ++ell) {
      cols.clear();
      vals.clear();
      sys.for_each_row_entry(ell, [&](Index c, double v) {
        Index kc = sys.kept_of_full_[c];
        if (kc >= 0) {
          cols.push_back(kc);
          vals.push_back(v);
        }
      });
      for (size_t a = 0; a < cols.size(); ++a)
        for (size_t b = 0; b < cols.size(); ++b)
          gram[static_cast<size_t>(cols[a]) * p + cols[b]] += (long double)vals[a] * vals[b];
    }
  }

  GreedyRank chol(p);
  std::vector<Index> kept_candidates;  // candidate positions kept
  out.dropped_.clear();
  std::vector<Index> new_kept_of_full(sys.nfull_, -1);
  std::vector<Index> new_full_of_kept;

  std::vector<long double> g, y;
  Vector cand_col, combo;
  constexpr long double kDropTol2 = 1e-10L;   // squared relative projection residual
  constexpr double kReprojectTol = 1e-9;      // spec check on the stacked matrix

  for (Index cand = 0; cand < p; ++cand) {
    const Index full_col = sys.full_of_kept_[cand];
    g.assign(kept_candidates.size(), 0.0L);
    for (size_t k = 0; k < kept_candidates.size(); ++k)
      g[k] = gram[static_cast<size_t>(cand) * p + kept_candidates[k]];
    const long double gjj = gram[static_cast<size_t>(cand) * p + cand];
    long double res2 = chol.residual2(g, gjj, y);

    if (res2 > kDropTol2 * gjj) {
      chol.append(y, res2);
      kept_candidates.push_back(cand);
      new_kept_of_full[full_col] = static_cast<Index>(new_full_of_kept.size());
      new_full_of_kept.push_back(full_col);
      continue;
    }

    // Dependent: verify the stacked [b^T; A] range is unchanged by the drop.
    std::vector<double> coeff = chol.expand(y);
    sys.full_column_dense(full_col, cand_col);
    combo.setZero(m);
    double combo_b = 0.0;
    Vector kept_col;
    for (size_t k = 0; k < coeff.size(); ++k) {
      if (coeff[k] == 0.0) continue;
      Index kf = sys.full_of_kept_[kept_candidates[k]];
      sys.full_column_dense(kf, kept_col);
      combo += coeff[k] * kept_col;
      combo_b += coeff[k] * sys.b_full_[kf];
    }
    const double num = (cand_col - combo).squaredNorm() +
                       (sys.b_full_[full_col] - combo_b) * (sys.b_full_[full_col] - combo_b);
    const double den = cand_col.squaredNorm() + sys.b_full_[full_col] * sys.b_full_[full_col];
    if (den > 0.0 && !(std::sqrt(num / den) <= kReprojectTol)) {
      throw SolverError("constraint inconsistent with marginals");
    }
    LinearSystem::Dropped d;
    d.full_col = full_col;
    for (size_t k = 0; k < coeff.size(); ++k) {
      if (coeff[k] != 0.0) {
        d.kept_cols.push_back(static_cast<Index>(k));
        d.coeff.push_back(coeff[k]);
      }
    }
    out.dropped_.push_back(std::move(d));
  }

  // carry over previously dropped columns (their kept references are stated
  // in reduced indices of the *input* system; remap to the new ones)
  for (const auto& d : sys.dropped_) {
    LinearSystem::Dropped nd;
    nd.full_col = d.full_col;
    for (size_t k = 0; k < d.kept_cols.size(); ++k) {
      Index full_ref = sys.full_of_kept_[d.kept_cols[k]];
      Index nk = new_kept_of_full[full_ref];
      if (nk < 0) throw std::logic_error("reduce_full_rank: stale drop reference");
      nd.kept_cols.push_back(nk);
      nd.coeff.push_back(d.coeff[k]);
    }
    out.dropped_.push_back(std::move(nd));
  }

  out.kept_of_full_ = std::move(new_kept_of_full);
  out.full_of_kept_ = std::move(new_full_of_kept);
  out.b_kept_.resize(out.full_of_kept_.size());
  for (size_t k = 0; k < out.full_of_kept_.size(); ++k)
    out.b_kept_[static_cast<Index>(k)] = out.b_full_[out.full_of_kept_[k]];
  out.reduced_ = true;
  return out;
}

}  // namespace otcurve
