#pragma once

#include "otcurve/constraint_basis.hpp"
#include "otcurve/grid.hpp"
#include "otcurve/marginal.hpp"
#include "otcurve/types.hpp"

#include <string>
#include <vector>

namespace otcurve {

// Constraint matrix A = [B, C] over the flat grid together with the right
// hand side b = [mu, 0]. Columns: one indicator block per constrained
// marginal, then the constraint basis vectors. Rows are never materialized;
// they are streamed from the grid structure and the sparse basis.
//
// After reduce_full_rank() some columns are marked dropped; every dropped
// column keeps its expansion on the kept ones, which yields the null-space
// data used to move potentials into the reduced gauge.
class LinearSystem {
 public:
  struct Block {
    int marginal;  // index into the problem's marginal list
    int axis;      // grid axis
    Index size;
    Index offset;  // first full column of the block
  };

  Index rows() const { return grid_.size(); }
  Index full_cols() const { return nfull_; }
  Index cols() const { return static_cast<Index>(full_of_kept_.size()); }
  bool reduced() const { return reduced_; }

  const ProductGrid& grid() const { return grid_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  Index constraint_count() const { return k_; }
  Index constraint_offset() const { return constraint_offset_; }

  const Vector& rhs() const { return b_kept_; }
  const Vector& rhs_full() const { return b_full_; }
  const std::vector<std::string>& column_labels() const { return labels_; }

  Index kept_index(Index full_col) const { return kept_of_full_[full_col]; }
  Index full_index(Index kept_col) const { return full_of_kept_[kept_col]; }

  // Current (reduced) column of marginal block `bi`, support point `q`;
  // -1 when that column was dropped.
  Index marginal_column(int bi, Index q) const { return kept_of_full_[blocks_[bi].offset + q]; }
  Index constraint_column(Index j) const { return kept_of_full_[constraint_offset_ + j]; }

  // --- row access over current columns ---
  double row_dot(Index ell, const Vector& phi) const;
  void add_row_scaled(Index ell, double w, Vector& acc) const;
  // acc += w * A_ell^T A_ell (full matrix, symmetric fill)
  void add_row_outer(Index ell, double w, Matrix& acc) const;
  // out = A^T gamma over current columns
  Vector apply_transpose(const Vector& gamma) const;

  Matrix dense() const;  // current columns; small systems / tests only

  // --- gauge handling ---
  // Add null-space multiples so all dropped coordinates vanish.
  void gauge_project(Vector& phi_full) const;
  Vector reduce_potentials(Vector phi_full) const;
  Vector embed_potentials(const Vector& phi_kept) const;

  friend LinearSystem build_system(const std::vector<DiscreteMarginal>& marginals,
                                   const std::vector<bool>& free_flags,
                                   const ConstraintBasis& basis);
  friend LinearSystem reduce_full_rank(const LinearSystem& sys);

 private:
  struct Dropped {
    Index full_col;
    std::vector<Index> kept_cols;  // reduced indices
    std::vector<double> coeff;
  };

  void full_column_dense(Index full_col, Vector& out) const;
  template <typename F>
  void for_each_row_entry(Index ell, F&& f) const;  // f(full_col, value)

  ProductGrid grid_;
  std::vector<Block> blocks_;
  Index k_ = 0;
  Index constraint_offset_ = 0;
  Index nfull_ = 0;

  // constraint entries by row (CSR)
  std::vector<Index> row_ptr_;
  std::vector<Index> row_cons_;   // constraint index j
  std::vector<double> row_val_;

  Vector b_full_;
  Vector b_kept_;
  std::vector<Index> kept_of_full_;
  std::vector<Index> full_of_kept_;
  std::vector<Dropped> dropped_;
  std::vector<std::string> labels_;
  bool reduced_ = false;
};

// Assemble the unreduced system. Throws std::invalid_argument("inconsistent
// basis") when basis vectors do not match the grid, and when no marginal is
// constrained.
LinearSystem build_system(const std::vector<DiscreteMarginal>& marginals,
                          const std::vector<bool>& free_flags,
                          const ConstraintBasis& basis);

// Greedy left-to-right column selection, marginal blocks first and then the
// constraint block. Every dropped column is verified to leave the column
// space of the stacked [b^T; A] unchanged (least-squares reprojection,
// relative residual <= 1e-9); a failing constraint column signals an
// infeasible problem and raises SolverError("constraint inconsistent with
// marginals").
LinearSystem reduce_full_rank(const LinearSystem& sys);

}  // namespace otcurve
