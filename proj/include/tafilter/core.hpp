#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace taf {

/// Row-major dense matrix. Row t of a feature sequence is the feature vector of frame t.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

/// Raised for malformed inputs (bad shapes, non-finite values, unreadable files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration or arguments.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DataError(what);
}

inline void require_arg(bool ok, const std::string& what) {
    if (!ok) throw UsageError(what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.allFinite();
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

inline Vector gaussian_vector(Eigen::Index n, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

/// Index of the largest element; ties go to the lowest index.
inline int argmax(const Vector& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

}  // namespace taf
