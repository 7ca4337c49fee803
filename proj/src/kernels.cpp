#include "ste/kernels.hpp"

namespace ste {

namespace {

void check_affine(const Matrix& W, const Vector& x, const Vector& b) {
    require_shape(W.cols == x.size(),
                  "affine: W is " + shape_str(W) + " but x has length " +
                      shape_str(x));
    require_shape(W.rows == b.size(),
                  "affine: W is " + shape_str(W) + " but b has length " +
                      shape_str(b));
}

void check_mask(const Matrix& W, const Matrix& M) {
    require_shape(W.same_shape(M), "mask shape " + shape_str(M) +
                                       " does not match weights " +
                                       shape_str(W));
}

} // namespace

// Work per row of a matvec is a contiguous dot product; each output element
// is owned by exactly one thread and accumulated left to right, matching the
// serial reference bit for bit. The `if` clause keeps tiny layers serial.

void affine_into(Vector& y, const Matrix& W, const Vector& x,
                 const Vector& b) {
    check_affine(W, x, b);
    y.resize(W.rows);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(W.rows);
    const std::size_t m = W.cols;
#pragma omp parallel for schedule(static) if (n >= 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double* w = W.row(static_cast<std::size_t>(i));
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += w[j] * x[j];
        y[static_cast<std::size_t>(i)] = acc + b[static_cast<std::size_t>(i)];
    }
}

Vector affine(const Matrix& W, const Vector& x, const Vector& b) {
    Vector y;
    affine_into(y, W, x, b);
    return y;
}

void matvec_t_into(Vector& dx, const Matrix& W, const Vector& dz) {
    require_shape(W.rows == dz.size(),
                  "matvec_t: W is " + shape_str(W) + " but dz has length " +
                      shape_str(dz));
    dx.resize(W.cols);
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(W.cols);
    const std::size_t n = W.rows;
#pragma omp parallel for schedule(static) if (m >= 64)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += W.at(i, static_cast<std::size_t>(j)) * dz[i];
        dx[static_cast<std::size_t>(j)] = acc;
    }
}

void outer_acc(Matrix& dW, const Vector& dz, const Vector& x) {
    require_shape(dW.rows == dz.size() && dW.cols == x.size(),
                  "outer_acc: dW is " + shape_str(dW) + ", dz " +
                      shape_str(dz) + ", x " + shape_str(x));
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dW.rows);
    const std::size_t m = dW.cols;
#pragma omp parallel for schedule(static) if (n >= 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double* w = dW.row(static_cast<std::size_t>(i));
        const double d = dz[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < m; ++j) w[j] += d * x[j];
    }
}

void masked_affine_into(Vector& y, const Matrix& W, const Matrix& M,
                        const Vector& x, const Vector& b) {
    check_affine(W, x, b);
    check_mask(W, M);
    y.resize(W.rows);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(W.rows);
    const std::size_t m = W.cols;
#pragma omp parallel for schedule(static) if (n >= 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double* w = W.row(static_cast<std::size_t>(i));
        const double* msk = M.row(static_cast<std::size_t>(i));
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += msk[j] * w[j] * x[j];
        y[static_cast<std::size_t>(i)] = acc + b[static_cast<std::size_t>(i)];
    }
}

void masked_matvec_t_into(Vector& dx, const Matrix& W, const Matrix& M,
                          const Vector& dz) {
    require_shape(W.rows == dz.size(),
                  "masked_matvec_t: W is " + shape_str(W) +
                      " but dz has length " + shape_str(dz));
    check_mask(W, M);
    dx.resize(W.cols);
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(W.cols);
    const std::size_t n = W.rows;
#pragma omp parallel for schedule(static) if (m >= 64)
    for (std::ptrdiff_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t jj = static_cast<std::size_t>(j);
            acc += M.at(i, jj) * W.at(i, jj) * dz[i];
        }
        dx[static_cast<std::size_t>(j)] = acc;
    }
}

void masked_outer_acc(Matrix& dW, const Matrix& M, const Vector& dz,
                      const Vector& x) {
    require_shape(dW.rows == dz.size() && dW.cols == x.size(),
                  "masked_outer_acc: dW is " + shape_str(dW) + ", dz " +
                      shape_str(dz) + ", x " + shape_str(x));
    check_mask(dW, M);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dW.rows);
    const std::size_t m = dW.cols;
#pragma omp parallel for schedule(static) if (n >= 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double* w = dW.row(static_cast<std::size_t>(i));
        const double* msk = M.row(static_cast<std::size_t>(i));
        const double d = dz[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < m; ++j) w[j] += msk[j] * d * x[j];
    }
}

namespace ref {

void affine_into(Vector& y, const Matrix& W, const Vector& x,
                 const Vector& b) {
    check_affine(W, x, b);
    y.resize(W.rows);
    for (std::size_t i = 0; i < W.rows; ++i) {
        const double* w = W.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < W.cols; ++j) acc += w[j] * x[j];
        y[i] = acc + b[i];
    }
}

Vector affine(const Matrix& W, const Vector& x, const Vector& b) {
    Vector y;
    affine_into(y, W, x, b);
    return y;
}

void matvec_t_into(Vector& dx, const Matrix& W, const Vector& dz) {
    require_shape(W.rows == dz.size(),
                  "matvec_t: W is " + shape_str(W) + " but dz has length " +
                      shape_str(dz));
    dx.resize(W.cols);
    for (std::size_t j = 0; j < W.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < W.rows; ++i) acc += W.at(i, j) * dz[i];
        dx[j] = acc;
    }
}

void outer_acc(Matrix& dW, const Vector& dz, const Vector& x) {
    require_shape(dW.rows == dz.size() && dW.cols == x.size(),
                  "outer_acc: dW is " + shape_str(dW) + ", dz " +
                      shape_str(dz) + ", x " + shape_str(x));
    for (std::size_t i = 0; i < dW.rows; ++i) {
        double* w = dW.row(i);
        for (std::size_t j = 0; j < dW.cols; ++j) w[j] += dz[i] * x[j];
    }
}

void masked_affine_into(Vector& y, const Matrix& W, const Matrix& M,
                        const Vector& x, const Vector& b) {
    check_affine(W, x, b);
    check_mask(W, M);
    y.resize(W.rows);
    for (std::size_t i = 0; i < W.rows; ++i) {
        const double* w = W.row(i);
        const double* msk = M.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < W.cols; ++j) acc += msk[j] * w[j] * x[j];
        y[i] = acc + b[i];
    }
}

void masked_matvec_t_into(Vector& dx, const Matrix& W, const Matrix& M,
                          const Vector& dz) {
    require_shape(W.rows == dz.size(),
                  "masked_matvec_t: W is " + shape_str(W) +
                      " but dz has length " + shape_str(dz));
    check_mask(W, M);
    dx.resize(W.cols);
    for (std::size_t j = 0; j < W.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < W.rows; ++i)
            acc += M.at(i, j) * W.at(i, j) * dz[i];
        dx[j] = acc;
    }
}

void masked_outer_acc(Matrix& dW, const Matrix& M, const Vector& dz,
                      const Vector& x) {
    require_shape(dW.rows == dz.size() && dW.cols == x.size(),
                  "masked_outer_acc: dW is " + shape_str(dW) + ", dz " +
                      shape_str(dz) + ", x " + shape_str(x));
    check_mask(dW, M);
    for (std::size_t i = 0; i < dW.rows; ++i) {
        double* w = dW.row(i);
        const double* msk = M.row(i);
        for (std::size_t j = 0; j < dW.cols; ++j) w[j] += msk[j] * dz[i] * x[j];
    }
}

} // namespace ref

Matrix matmul(const Matrix& A, const Matrix& B) {
    require_shape(A.cols == B.rows, "matmul: " + shape_str(A) + " times " +
                                        shape_str(B));
    Matrix C(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double a = A.at(i, k);
            if (a == 0.0) continue;
            const double* brow = B.row(k);
            double* crow = C.row(i);
            for (std::size_t j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
        }
    }
    return C;
}

} // namespace ste
