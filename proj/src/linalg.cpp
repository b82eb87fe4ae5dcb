#include "mlbp/linalg.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mlbp {

Vec matvec(const Mat& A, const Vec& x) {
    if (A.cols() != x.size())
        throw DimensionError("matvec: A is " + std::to_string(A.rows()) + "x" +
                             std::to_string(A.cols()) + " but x has dim " +
                             std::to_string(x.size()));
    return A * x;
}

Vec adjoint_matvec(const Mat& A, const Vec& x) {
    if (A.rows() != x.size())
        throw DimensionError("adjoint_matvec: A is " + std::to_string(A.rows()) + "x" +
                             std::to_string(A.cols()) + " but x has dim " +
                             std::to_string(x.size()));
    return A.transpose() * x;
}

Mat compose_dictionaries(const std::vector<Mat>& dicts, int i, int L) {
    if (i < 1 || L > static_cast<int>(dicts.size()) || i > L + 1)
        throw DimensionError("compose_dictionaries: invalid range [" + std::to_string(i) +
                             "," + std::to_string(L) + "] for chain of length " +
                             std::to_string(dicts.size()));
    if (i == L + 1) {  // empty range: identity on the code space of D_L
        Index m = dicts[L - 1].cols();
        return Mat::Identity(m, m);
    }
    Mat acc = dicts[i - 1];
    for (int j = i; j < L; ++j) {
        if (acc.cols() != dicts[j].rows())
            throw DimensionError("compose_dictionaries: dimension break between layer " +
                                 std::to_string(j) + " and " + std::to_string(j + 1));
        acc = acc * dicts[j];
    }
    return acc;
}

double spectral_norm(const Mat& A, double tol, int max_iter) {
    if (tol <= 0) throw std::invalid_argument("spectral_norm: tol must be positive");
    if (A.rows() == 0 || A.cols() == 0) return 0.0;

    Vec v = Vec::Ones(A.cols());
    v /= v.norm();
    double sigma = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vec w = A.transpose() * (A * v);
        double lambda = w.norm();
        if (lambda == 0.0) return 0.0;  // v landed in the nullspace of A
        double sigma_new = std::sqrt(lambda);
        v = w / lambda;
        if (std::abs(sigma_new - sigma) <= tol * sigma_new) return sigma_new;
        sigma = sigma_new;
    }
    throw ConvergenceError("spectral_norm: no convergence after " +
                           std::to_string(max_iter) + " iterations", sigma);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void save_matrix_csv(const std::filesystem::path& path, const Mat& A) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (Index r = 0; r < A.rows(); ++r) {
        for (Index c = 0; c < A.cols(); ++c) {
            if (c) out << ',';
            out << format_double(A(r, c));
        }
        out << '\n';
    }
}

Mat load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged CSV: " + path.string());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Mat(0, 0);
    Mat A(rows.size(), rows.front().size());
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].size(); ++c)
            A(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return A;
}

void save_vector_csv(const std::filesystem::path& path, const Vec& v) {
    save_matrix_csv(path, v);
}

Vec load_vector_csv(const std::filesystem::path& path) {
    Mat A = load_matrix_csv(path);
    if (A.cols() != 1 && A.rows() != 1)
        throw std::runtime_error("not a vector CSV: " + path.string());
    if (A.cols() == 1) return A.col(0);
    return A.row(0).transpose();
}

}  // namespace mlbp
