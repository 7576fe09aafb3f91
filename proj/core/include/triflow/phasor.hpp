#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace triflow {

using cx = std::complex<double>;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

/// Complex vector over at most three conductors.
class CVec {
  public:
    CVec() = default;
    explicit CVec(int n) : n_(n) {}
    CVec(std::initializer_list<cx> init);

    int size() const { return n_; }
    cx& operator[](int k) { return e_[static_cast<std::size_t>(k)]; }
    const cx& operator[](int k) const { return e_[static_cast<std::size_t>(k)]; }

    CVec operator+(const CVec& o) const;
    CVec operator-(const CVec& o) const;
    CVec operator-() const;
    CVec conj() const;

    /// Largest entry magnitude.
    double inf_norm() const;

  private:
    int n_ = 0;
    std::array<cx, 3> e_{};
};

/// Dense complex matrix over at most three conductors per side.
/// Rectangular shapes arise for voltage cross products between buses
/// with different phase sets.
class CMat {
  public:
    CMat() = default;
    CMat(int rows, int cols) : rows_(rows), cols_(cols) {}
    explicit CMat(int n) : rows_(n), cols_(n) {}

    static CMat identity(int n);
    static CMat diagonal(const CVec& d);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    cx& at(int r, int c) { return e_[static_cast<std::size_t>(r * cols_ + c)]; }
    const cx& at(int r, int c) const { return e_[static_cast<std::size_t>(r * cols_ + c)]; }

    CMat operator+(const CMat& o) const;
    CMat operator-(const CMat& o) const;
    CMat operator-() const;
    CMat operator*(const CMat& o) const;
    CVec operator*(const CVec& v) const;
    CMat operator*(cx s) const;

    /// Conjugate transpose.
    CMat adjoint() const;
    CMat transpose() const;
    CMat conj() const;
    CMat real_part() const;  // entries Re(m) + 0i
    CMat imag_part() const;  // entries Im(m) + 0i
    CVec diagonal_vec() const;

    double inf_norm() const;  // largest entry magnitude
    bool is_zero() const;     // all entries exactly zero

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::array<cx, 9> e_{};
};

/// Outer product u v^H; rank <= 1 by construction.
CMat outer(const CVec& u, const CVec& v);

/// Hermitian matrix stored as a symmetric real part and an antisymmetric
/// imaginary part. Construction mirrors the upper triangle so both
/// symmetry properties hold exactly in floating point.
class Hermitian {
  public:
    Hermitian() = default;
    explicit Hermitian(int n) : n_(n) {}

    /// Symmetrizes by averaging m and m^H; `defect` (when given) receives
    /// the largest deviation |m - m^H| observed.
    static Hermitian from(const CMat& m, double* defect = nullptr);
    /// Exact outer product u u^H.
    static Hermitian from_outer(const CVec& u);

    int size() const { return n_; }
    double re(int r, int c) const { return re_[static_cast<std::size_t>(r * n_ + c)]; }
    double im(int r, int c) const { return im_[static_cast<std::size_t>(r * n_ + c)]; }
    cx at(int r, int c) const { return {re(r, c), im(r, c)}; }
    void set(int r, int c, cx value);  // mirrors into (c, r)

    CMat to_cmat() const;
    Hermitian operator-(const Hermitian& o) const;

    double inf_norm() const;

  private:
    int n_ = 0;
    std::array<double, 9> re_{};
    std::array<double, 9> im_{};
};

/// Dense complex matrix of small but unbounded dimension; spectral work
/// on lifted blocks (bus pairs, branch blocks, system matrices).
class CDense {
  public:
    CDense() = default;
    explicit CDense(int n) : n_(n), a_(static_cast<std::size_t>(n) * n) {}

    int size() const { return n_; }
    cx& at(int r, int c) { return a_[static_cast<std::size_t>(r) * n_ + c]; }
    const cx& at(int r, int c) const { return a_[static_cast<std::size_t>(r) * n_ + c]; }

    static CDense from_cmat(const CMat& m);
    /// Places `m` with its top-left corner at (r0, c0); the adjoint is
    /// mirrored automatically when r0 != c0 blocks are set one-sided.
    void set_block(int r0, int c0, const CMat& m);

    double inf_norm() const;

  private:
    int n_ = 0;
    std::vector<cx> a_;
};

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations
/// (tolerance 1e-14 relative, 100 sweep cap). Input is symmetrized by
/// averaging before iteration. Values ascend.
struct HermitianEig {
    std::vector<double> values;
    CDense vectors;  // columns
};
HermitianEig hermitian_eig(const CDense& m);
std::vector<double> hermitian_eigenvalues(const CDense& m);

/// Singular values, descending (via the eigenvalues of m^H m).
std::vector<double> singular_values(const CMat& m);
std::vector<double> singular_values(const CDense& m);

/// sigma_2 / sigma_1; zero for the zero matrix. Zero iff rank <= 1.
double rank1_residual(const CMat& m);
double rank1_residual(const CDense& m);

/// max(0, -lambda_min); zero iff positive semidefinite.
double psd_residual(const Hermitian& m);
double psd_residual(const CDense& m);

/// Moore-Penrose pseudoinverse; exact inverse when m is invertible.
CMat pinv(const CMat& m);

/// Dense real matrix. Used for the real embedding of Hermitian blocks
/// and for the power-flow Jacobian.
class Mat {
  public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& at(int r, int c) { return a_[static_cast<std::size_t>(r) * cols_ + c]; }
    const double& at(int r, int c) const { return a_[static_cast<std::size_t>(r) * cols_ + c]; }

    double inf_norm() const;  // largest entry magnitude

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

/// [[Re, Im], [-Im, Re]]: a symmetric real matrix of doubled dimension
/// whose spectrum is that of the Hermitian input, each value twice.
Mat real_embedding(const Hermitian& m);
Mat real_embedding(const CDense& m);

/// Interprets a symmetric real matrix as complex and hands it to the
/// Hermitian eigensolver.
std::vector<double> symmetric_eigenvalues(const Mat& m);

/// Solves A x = b in place by LU with partial pivoting.
/// Returns the failing column index on a zero pivot, -1 on success.
int lu_solve(Mat a, std::vector<double>& b);

}  // namespace triflow
