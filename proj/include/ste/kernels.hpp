#pragma once

#include "ste/matrix.hpp"

namespace ste {

// Dense kernels behind every forward/backward pass. The functions in this
// namespace are OpenMP-parallel over the output index; ste::ref holds the
// serial reference implementations used by the tests and the benchmark.
//
// Both variants accumulate each output element in the same (input-index)
// order, so results are bit-identical regardless of thread count.

// y = W x + b
Vector affine(const Matrix& W, const Vector& x, const Vector& b);
void affine_into(Vector& y, const Matrix& W, const Vector& x, const Vector& b);

// dx = W^T dz
void matvec_t_into(Vector& dx, const Matrix& W, const Vector& dz);

// dW += dz x^T
void outer_acc(Matrix& dW, const Vector& dz, const Vector& x);

// Dropconnect variants: the 0/1 mask M is applied entrywise to W.
// y = (M .* W) x + b
void masked_affine_into(Vector& y, const Matrix& W, const Matrix& M,
                        const Vector& x, const Vector& b);
// dx = (M .* W)^T dz
void masked_matvec_t_into(Vector& dx, const Matrix& W, const Matrix& M,
                          const Vector& dz);
// dW += M .* (dz x^T)
void masked_outer_acc(Matrix& dW, const Matrix& M, const Vector& dz,
                      const Vector& x);

namespace ref {

Vector affine(const Matrix& W, const Vector& x, const Vector& b);
void affine_into(Vector& y, const Matrix& W, const Vector& x, const Vector& b);
void matvec_t_into(Vector& dx, const Matrix& W, const Vector& dz);
void outer_acc(Matrix& dW, const Vector& dz, const Vector& x);
void masked_affine_into(Vector& y, const Matrix& W, const Matrix& M,
                        const Vector& x, const Vector& b);
void masked_matvec_t_into(Vector& dx, const Matrix& W, const Matrix& M,
                          const Vector& dz);
void masked_outer_acc(Matrix& dW, const Matrix& M, const Vector& dz,
                      const Vector& x);

} // namespace ref

// C = A B (small matrices only; used by the collapse fold)
Matrix matmul(const Matrix& A, const Matrix& B);

} // namespace ste
