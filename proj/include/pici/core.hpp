#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pici {

/// Row-major dense matrix. Token sequences and batches are stored one row per item.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using Labels = std::vector<int>;

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PICI_DEFINE_ERROR(Name)                   \
    class Name : public Error {                   \
    public:                                       \
        using Error::Error;                       \
    }

PICI_DEFINE_ERROR(InvalidImage);
PICI_DEFINE_ERROR(PatchGridError);
PICI_DEFINE_ERROR(InvalidRatio);
PICI_DEFINE_ERROR(ConfigError);
PICI_DEFINE_ERROR(ZeroNormError);
PICI_DEFINE_ERROR(InvalidTemperature);
PICI_DEFINE_ERROR(InvalidProbability);
PICI_DEFINE_ERROR(InputError);
PICI_DEFINE_ERROR(EmptyDatasetError);
PICI_DEFINE_ERROR(CheckpointError);
PICI_DEFINE_ERROR(StageError);

#undef PICI_DEFINE_ERROR

/// Cluster contrastive loss met a column with zero mass.
class EmptyClusterError : public ZeroNormError {
public:
    using ZeroNormError::ZeroNormError;
};

/// Non-finite loss during training.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t batch_index)
        : Error(what + " (batch " + std::to_string(batch_index) + ")"), batch_index_(batch_index) {}
    std::size_t batch_index() const noexcept { return batch_index_; }

private:
    std::size_t batch_index_;
};

/// Half-up rounding of a non-negative real to an integer count.
inline std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(x + 0.5);
}

}  // namespace pici
