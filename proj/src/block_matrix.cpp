#include "spherediff/block_matrix.hpp"

#include <map>
#include <stdexcept>

namespace spherediff {

BlockMatrix::BlockMatrix(int size, std::vector<MatrixBlock> blocks)
    : size_(size), blocks_(std::move(blocks)), block_of_(size, -1), position_(size, -1) {
  for (int b = 0; b < static_cast<int>(blocks_.size()); ++b) {
    const MatrixBlock& blk = blocks_[b];
    const auto len = static_cast<Eigen::Index>(blk.index.size());
    if (!blk.values || blk.values->rows() != len || blk.values->cols() != len) {
      throw std::invalid_argument("BlockMatrix: block values do not match the index list");
    }
    for (int p = 0; p < static_cast<int>(blk.index.size()); ++p) {
      const int i = blk.index[p];
      if (i < 0 || i >= size) throw std::invalid_argument("BlockMatrix: index out of range");
      if (block_of_[i] != -1) throw std::invalid_argument("BlockMatrix: overlapping blocks");
      block_of_[i] = b;
      position_[i] = p;
    }
  }
}

double BlockMatrix::coeff(int row, int col) const {
  const int b = block_of(row);
  if (b < 0 || block_of(col) != b) return 0.0;
  return (*blocks_[b].values)(position_[row], position_[col]);
}

Eigen::MatrixXd BlockMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size_, size_);
  for (const MatrixBlock& blk : blocks_) {
    for (std::size_t i = 0; i < blk.index.size(); ++i) {
      for (std::size_t j = 0; j < blk.index.size(); ++j) out(blk.index[i], blk.index[j]) = (*blk.values)(i, j);
    }
  }
  return out;
}

Eigen::VectorXcd BlockMatrix::apply(const Eigen::VectorXcd& x) const {
  if (x.size() != size_) throw std::invalid_argument("BlockMatrix::apply: dimension mismatch");
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(size_);
  Eigen::VectorXd re, im, out_re, out_im;
  for (const MatrixBlock& blk : blocks_) {
    const auto len = static_cast<Eigen::Index>(blk.index.size());
    re.resize(len);
    im.resize(len);
    bool any = false;
    for (Eigen::Index i = 0; i < len; ++i) {
      re[i] = x[blk.index[i]].real();
      im[i] = x[blk.index[i]].imag();
      any = any || re[i] != 0.0 || im[i] != 0.0;
    }
    if (!any) continue;
    out_re.noalias() = *blk.values * re;
    if (im.isZero(0.0)) {
      out_im.setZero(len);
    } else {
      out_im.noalias() = *blk.values * im;
    }
    for (Eigen::Index i = 0; i < len; ++i) y[blk.index[i]] = {out_re[i], out_im[i]};
  }
  return y;
}

BlockMatrix BlockMatrix::scaled(double factor) const {
  std::map<const Eigen::MatrixXd*, std::shared_ptr<const Eigen::MatrixXd>> done;
  std::vector<MatrixBlock> out = blocks_;
  for (MatrixBlock& blk : out) {
    auto& slot = done[blk.values.get()];
    if (!slot) slot = std::make_shared<const Eigen::MatrixXd>(factor * *blk.values);
    blk.values = slot;
  }
  return BlockMatrix(size_, std::move(out));
}

}  // namespace spherediff
