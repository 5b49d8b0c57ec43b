#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

namespace spherediff {

/// One dense block of a block-sparse square matrix. Rows and columns share
/// the same global index list; value storage may be shared between blocks.
struct MatrixBlock {
  int n = -1;  // order, -1 when the block spans several orders
  int m = 0;   // degree
  std::vector<int> index;
  std::shared_ptr<const Eigen::MatrixXd> values;
};

/// Square matrix that is zero outside a set of disjoint diagonal blocks.
class BlockMatrix {
 public:
  BlockMatrix() = default;
  /// Throws std::invalid_argument if blocks overlap, leave the index range or
  /// have mismatched value shapes.
  BlockMatrix(int size, std::vector<MatrixBlock> blocks);

  int size() const { return size_; }
  const std::vector<MatrixBlock>& blocks() const { return blocks_; }
  /// Block holding global index i, or -1 if the row is empty.
  int block_of(int i) const { return block_of_.at(i); }
  /// Position of global index i inside its block.
  int position_in_block(int i) const { return position_.at(i); }

  double coeff(int row, int col) const;
  Eigen::MatrixXd to_dense() const;

  /// y = M x.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

  /// Returns a copy with every entry multiplied by factor.
  BlockMatrix scaled(double factor) const;

 private:
  int size_ = 0;
  std::vector<MatrixBlock> blocks_;
  std::vector<int> block_of_;
  std::vector<int> position_;
};

}  // namespace spherediff
