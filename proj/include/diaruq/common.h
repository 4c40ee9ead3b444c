// diaruq/include/diaruq/common.h
//
// Copyright (c) 2026 The diaruq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARUQ_COMMON_H_
#define DIARUQ_COMMON_H_

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diaruq {

/// Raised when a caller violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on malformed binary or text files (bad magic, truncation, ...).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by text parsers that can point at a source location.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Row-major dense array of arbitrary rank.
template <typename T>
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(std::vector<std::size_t> shape, T fill = T{})
      : shape_(std::move(shape)) {
    strides_.assign(shape_.size(), 1);
    for (std::size_t i = shape_.size(); i-- > 1;)
      strides_[i - 1] = strides_[i] * shape_[i];
    data_.assign(count(shape_), fill);
  }

  std::size_t rank() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  template <typename... I>
  T& operator()(I... idx) {
    return data_[offset(idx...)];
  }
  template <typename... I>
  const T& operator()(I... idx) const {
    return data_[offset(idx...)];
  }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool operator==(const NdArray& other) const = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  template <typename... I>
  std::size_t offset(I... idx) const {
    std::size_t i = 0, off = 0;
    ((off += static_cast<std::size_t>(idx) * strides_[i++]), ...);
    return off;
  }

  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  std::vector<T> data_;
};

using BinaryMatrix = NdArray<unsigned char>;

/// Worker count, bounded by DIARUQ_THREADS when set.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) on up to thread_count() threads. Exceptions
/// thrown by fn are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace diaruq

#endif  // DIARUQ_COMMON_H_
