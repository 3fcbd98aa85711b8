#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "hsdrive/errors.hpp"

namespace hsd {

using Index = std::ptrdiff_t;

/// Dense H x W x C array stored row-major with the channel index fastest
/// (band-interleaved-by-pixel). Used for cubes, patches, activations and
/// score maps alike.
template <typename Scalar>
class Tensor3 {
 public:
  using value_type = Scalar;
  using MatrixMap =
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor3() = default;
  Tensor3(Index height, Index width, Index channels, Scalar fill = Scalar(0))
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 0) {
      throw DataError("Tensor3: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(height * width * channels), fill);
  }
  Tensor3(Index height, Index width, Index channels, std::vector<Scalar> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (static_cast<Index>(data_.size()) != height * width * channels) {
      throw DataError("Tensor3: payload length does not match dimensions");
    }
  }

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return channels_; }
  Index pixels() const { return height_ * width_; }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar& operator()(Index r, Index c, Index k) { return data_[offset(r, c, k)]; }
  const Scalar& operator()(Index r, Index c, Index k) const { return data_[offset(r, c, k)]; }

  std::span<Scalar> pixel(Index r, Index c) {
    return {data_.data() + offset(r, c, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const Scalar> pixel(Index r, Index c) const {
    return {data_.data() + offset(r, c, 0), static_cast<std::size_t>(channels_)};
  }

  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }
  const std::vector<Scalar>& storage() const { return data_; }

  /// (H*W) x C view: one spectrum per row.
  MatrixMap as_matrix() { return MatrixMap(data_.data(), pixels(), channels_); }
  ConstMatrixMap as_matrix() const { return ConstMatrixMap(data_.data(), pixels(), channels_); }

  bool same_shape(const Tensor3& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  template <typename Other>
  bool same_shape(const Tensor3<Other>& o) const {
    return height_ == o.height() && width_ == o.width() && channels_ == o.channels();
  }

  template <typename Target>
  Tensor3<Target> cast() const {
    std::vector<Target> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](Scalar v) { return static_cast<Target>(v); });
    return Tensor3<Target>(height_, width_, channels_, std::move(out));
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t offset(Index r, Index c, Index k) const {
    return static_cast<std::size_t>((r * width_ + c) * channels_ + k);
  }

  Index height_ = 0;
  Index width_ = 0;
  Index channels_ = 0;
  std::vector<Scalar> data_;
};

}  // namespace hsd
