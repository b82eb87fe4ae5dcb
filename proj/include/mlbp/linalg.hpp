#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "mlbp/types.hpp"

namespace mlbp {

/// A * x with explicit dimension checking.
Vec matvec(const Mat& A, const Vec& x);

/// A^T * x without materializing the transpose.
Vec adjoint_matvec(const Mat& A, const Vec& x);

/// Product D_i * D_{i+1} * ... * D_L over a 1-based inclusive range of the chain.
Mat compose_dictionaries(const std::vector<Mat>& dicts, int i, int L);

/// Largest singular value via power iteration on A^T A.
/// Starts from the normalized all-ones vector; throws ConvergenceError
/// (carrying the best estimate) if the relative change does not drop
/// below tol within max_iter sweeps.
double spectral_norm(const Mat& A, double tol = 1e-9, int max_iter = 10000);

// Abstract apply/adjoint pair so a structured (e.g. convolutional) backend
// could replace dense storage without touching the solvers.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;
    virtual Index rows() const = 0;
    virtual Index cols() const = 0;
    virtual Vec apply(const Vec& x) const = 0;
    virtual Vec apply_adjoint(const Vec& x) const = 0;
};

class DenseOperator final : public LinearOperator {
public:
    explicit DenseOperator(Mat A) : A_(std::move(A)) {}
    Index rows() const override { return A_.rows(); }
    Index cols() const override { return A_.cols(); }
    Vec apply(const Vec& x) const override { return matvec(A_, x); }
    Vec apply_adjoint(const Vec& x) const override { return adjoint_matvec(A_, x); }
    const Mat& matrix() const { return A_; }

private:
    Mat A_;
};

// CSV fixtures: one row per line, comma separated, '.' decimal point.
void save_matrix_csv(const std::filesystem::path& path, const Mat& A);
Mat load_matrix_csv(const std::filesystem::path& path);
void save_vector_csv(const std::filesystem::path& path, const Vec& v);
Vec load_vector_csv(const std::filesystem::path& path);

/// Shortest round-trippable decimal form of a double ("%.17g" fallback).
std::string format_double(double v);

}  // namespace mlbp
