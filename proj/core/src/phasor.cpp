#include "triflow/phasor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace triflow {

double wrap_angle(double theta) {
    const double two_pi = 2.0 * std::numbers::pi;
    double t = std::fmod(theta, two_pi);
    if (t <= -std::numbers::pi) t += two_pi;
    if (t > std::numbers::pi) t -= two_pi;
    return t;
}

CVec::CVec(std::initializer_list<cx> init) : n_(static_cast<int>(init.size())) {
    assert(n_ <= 3);
    int k = 0;
    for (cx v : init) e_[static_cast<std::size_t>(k++)] = v;
}

CVec CVec::operator+(const CVec& o) const {
    assert(n_ == o.n_);
    CVec r(n_);
    for (int k = 0; k < n_; ++k) r[k] = (*this)[k] + o[k];
    return r;
}

CVec CVec::operator-(const CVec& o) const {
    assert(n_ == o.n_);
    CVec r(n_);
    for (int k = 0; k < n_; ++k) r[k] = (*this)[k] - o[k];
    return r;
}

CVec CVec::operator-() const {
    CVec r(n_);
    for (int k = 0; k < n_; ++k) r[k] = -(*this)[k];
    return r;
}

CVec CVec::conj() const {
    CVec r(n_);
    for (int k = 0; k < n_; ++k) r[k] = std::conj((*this)[k]);
    return r;
}

double CVec::inf_norm() const {
    double m = 0.0;
    for (int k = 0; k < n_; ++k) m = std::max(m, std::abs((*this)[k]));
    return m;
}

CMat CMat::identity(int n) {
    CMat m(n);
    for (int k = 0; k < n; ++k) m.at(k, k) = 1.0;
    return m;
}

CMat CMat::diagonal(const CVec& d) {
    CMat m(d.size());
    for (int k = 0; k < d.size(); ++k) m.at(k, k) = d[k];
    return m;
}

CMat CMat::operator+(const CMat& o) const {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i)
        r.e_[static_cast<std::size_t>(i)] = e_[static_cast<std::size_t>(i)] + o.e_[static_cast<std::size_t>(i)];
    return r;
}

CMat CMat::operator-(const CMat& o) const {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i)
        r.e_[static_cast<std::size_t>(i)] = e_[static_cast<std::size_t>(i)] - o.e_[static_cast<std::size_t>(i)];
    return r;
}

CMat CMat::operator-() const {
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i) r.e_[static_cast<std::size_t>(i)] = -e_[static_cast<std::size_t>(i)];
    return r;
}

CMat CMat::operator*(const CMat& o) const {
    assert(cols_ == o.rows_);
    CMat r(rows_, o.cols_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < o.cols_; ++j) {
            cx s = 0.0;
            for (int k = 0; k < cols_; ++k) s += at(i, k) * o.at(k, j);
            r.at(i, j) = s;
        }
    return r;
}

CVec CMat::operator*(const CVec& v) const {
    assert(cols_ == v.size());
    CVec r(rows_);
    for (int i = 0; i < rows_; ++i) {
        cx s = 0.0;
        for (int k = 0; k < cols_; ++k) s += at(i, k) * v[k];
        r[i] = s;
    }
    return r;
}

CMat CMat::operator*(cx s) const {
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i) r.e_[static_cast<std::size_t>(i)] = e_[static_cast<std::size_t>(i)] * s;
    return r;
}

CMat CMat::adjoint() const {
    CMat r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) r.at(j, i) = std::conj(at(i, j));
    return r;
}

CMat CMat::transpose() const {
    CMat r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) r.at(j, i) = at(i, j);
    return r;
}

CMat CMat::conj() const {
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i) r.e_[static_cast<std::size_t>(i)] = std::conj(e_[static_cast<std::size_t>(i)]);
    return r;
}

CMat CMat::real_part() const {
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i) r.e_[static_cast<std::size_t>(i)] = e_[static_cast<std::size_t>(i)].real();
    return r;
}

CMat CMat::imag_part() const {
    CMat r(rows_, cols_);
    for (int i = 0; i < rows_ * cols_; ++i) r.e_[static_cast<std::size_t>(i)] = e_[static_cast<std::size_t>(i)].imag();
    return r;
}

CVec CMat::diagonal_vec() const {
    assert(square());
    CVec r(rows_);
    for (int k = 0; k < rows_; ++k) r[k] = at(k, k);
    return r;
}

double CMat::inf_norm() const {
    double m = 0.0;
    for (int i = 0; i < rows_ * cols_; ++i) m = std::max(m, std::abs(e_[static_cast<std::size_t>(i)]));
    return m;
}

bool CMat::is_zero() const {
    for (int i = 0; i < rows_ * cols_; ++i)
        if (e_[static_cast<std::size_t>(i)] != cx{0.0, 0.0}) return false;
    return true;
}

CMat outer(const CVec& u, const CVec& v) {
    CMat r(u.size(), v.size());
    for (int i = 0; i < u.size(); ++i)
        for (int j = 0; j < v.size(); ++j) r.at(i, j) = u[i] * std::conj(v[j]);
    return r;
}

Hermitian Hermitian::from(const CMat& m, double* defect) {
    assert(m.square());
    Hermitian h(m.rows());
    double worst = 0.0;
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = r; c < m.cols(); ++c) {
            cx upper = m.at(r, c);
            cx lower = std::conj(m.at(c, r));
            worst = std::max(worst, std::abs(upper - lower));
            h.set(r, c, 0.5 * (upper + lower));
        }
    }
    if (defect) *defect = worst;
    return h;
}

Hermitian Hermitian::from_outer(const CVec& u) {
    Hermitian h(u.size());
    for (int r = 0; r < u.size(); ++r)
        for (int c = r; c < u.size(); ++c) h.set(r, c, u[r] * std::conj(u[c]));
    return h;
}

void Hermitian::set(int r, int c, cx value) {
    if (r == c) value = cx{value.real(), 0.0};
    re_[static_cast<std::size_t>(r * n_ + c)] = value.real();
    re_[static_cast<std::size_t>(c * n_ + r)] = value.real();
    im_[static_cast<std::size_t>(r * n_ + c)] = value.imag();
    im_[static_cast<std::size_t>(c * n_ + r)] = -value.imag();
}

CMat Hermitian::to_cmat() const {
    CMat m(n_);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) m.at(r, c) = at(r, c);
    return m;
}

Hermitian Hermitian::operator-(const Hermitian& o) const {
    assert(n_ == o.n_);
    Hermitian h(n_);
    for (int r = 0; r < n_; ++r)
        for (int c = r; c < n_; ++c) h.set(r, c, at(r, c) - o.at(r, c));
    return h;
}

double Hermitian::inf_norm() const {
    double m = 0.0;
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) m = std::max(m, std::abs(at(r, c)));
    return m;
}

CDense CDense::from_cmat(const CMat& m) {
    assert(m.square());
    CDense d(m.rows());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) d.at(r, c) = m.at(r, c);
    return d;
}

void CDense::set_block(int r0, int c0, const CMat& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) at(r0 + r, c0 + c) = m.at(r, c);
}

double CDense::inf_norm() const {
    double m = 0.0;
    for (const cx& v : a_) m = std::max(m, std::abs(v));
    return m;
}

namespace {

// One cyclic Jacobi sweep target: annihilate a_pq via the unitary
// rotation J with J_pp = J_qq = c, J_pq = s e^{i phi}, J_qp = -s e^{-i phi}.
void jacobi_rotate(CDense& a, CDense* v, int p, int q) {
    const cx apq = a.at(p, q);
    const double r = std::abs(apq);
    if (r == 0.0) return;
    const cx w = apq / r;  // e^{i phi}
    const double app = a.at(p, p).real();
    const double aqq = a.at(q, q).real();
    const double tau = (aqq - app) / (2.0 * r);
    double t;
    if (tau >= 0.0)
        t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
    else
        t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = t * c;

    const int n = a.size();
    for (int k = 0; k < n; ++k) {
        const cx akp = a.at(k, p);
        const cx akq = a.at(k, q);
        a.at(k, p) = c * akp - s * std::conj(w) * akq;
        a.at(k, q) = s * w * akp + c * akq;
    }
    for (int k = 0; k < n; ++k) {
        const cx apk = a.at(p, k);
        const cx aqk = a.at(q, k);
        a.at(p, k) = c * apk - s * w * aqk;
        a.at(q, k) = s * std::conj(w) * apk + c * aqk;
    }
    // Clean the rotated pair so symmetry does not drift.
    a.at(p, q) = 0.0;
    a.at(q, p) = 0.0;
    a.at(p, p) = cx{a.at(p, p).real(), 0.0};
    a.at(q, q) = cx{a.at(q, q).real(), 0.0};

    if (v) {
        for (int k = 0; k < n; ++k) {
            const cx vkp = v->at(k, p);
            const cx vkq = v->at(k, q);
            v->at(k, p) = c * vkp - s * std::conj(w) * vkq;
            v->at(k, q) = s * w * vkp + c * vkq;
        }
    }
}

double off_diagonal_max(const CDense& a) {
    double m = 0.0;
    for (int r = 0; r < a.size(); ++r)
        for (int c = r + 1; c < a.size(); ++c) m = std::max(m, std::abs(a.at(r, c)));
    return m;
}

HermitianEig jacobi_eig(CDense a, bool want_vectors) {
    const int n = a.size();
    // Symmetrize by averaging before iterating.
    for (int r = 0; r < n; ++r) {
        for (int c = r + 1; c < n; ++c) {
            cx v = 0.5 * (a.at(r, c) + std::conj(a.at(c, r)));
            a.at(r, c) = v;
            a.at(c, r) = std::conj(v);
        }
        a.at(r, r) = cx{a.at(r, r).real(), 0.0};
    }

    CDense vectors;
    if (want_vectors) {
        vectors = CDense(n);
        for (int k = 0; k < n; ++k) vectors.at(k, k) = 1.0;
    }

    const double scale = std::max(a.inf_norm(), 1.0);
    constexpr int kMaxSweeps = 100;
    constexpr double kTol = 1e-14;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (off_diagonal_max(a) <= kTol * scale) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) jacobi_rotate(a, want_vectors ? &vectors : nullptr, p, q);
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return a.at(x, x).real() < a.at(y, y).real(); });

    HermitianEig out;
    out.values.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out.values[static_cast<std::size_t>(k)] = a.at(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]).real();
    if (want_vectors) {
        out.vectors = CDense(n);
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) out.vectors.at(r, c) = vectors.at(r, order[static_cast<std::size_t>(c)]);
    }
    return out;
}

}  // namespace

HermitianEig hermitian_eig(const CDense& m) { return jacobi_eig(m, true); }

std::vector<double> hermitian_eigenvalues(const CDense& m) { return jacobi_eig(m, false).values; }

namespace {

// One-sided (Hestenes) Jacobi on the columns: keeps tiny singular
// values at full relative precision, which the rank-1 residuals need.
std::vector<double> hestenes_singular_values(int rows, int cols, std::vector<cx> a) {
    auto at = [&](int r, int c) -> cx& { return a[static_cast<std::size_t>(r) * cols + c]; };
    constexpr int kMaxSweeps = 100;
    constexpr double kOrthTol = 1e-15;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < cols; ++p)
            for (int q = p + 1; q < cols; ++q) {
                double app = 0.0, aqq = 0.0;
                cx h = 0.0;
                for (int k = 0; k < rows; ++k) {
                    app += std::norm(at(k, p));
                    aqq += std::norm(at(k, q));
                    h += std::conj(at(k, p)) * at(k, q);
                }
                const double r = std::abs(h);
                if (r <= kOrthTol * std::sqrt(app * aqq) || r == 0.0) continue;
                rotated = true;
                const cx w = h / r;
                const double tau = (aqq - app) / (2.0 * r);
                double t;
                if (tau >= 0.0)
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                else
                    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < rows; ++k) {
                    const cx akp = at(k, p);
                    const cx akq = at(k, q);
                    at(k, p) = c * akp - s * std::conj(w) * akq;
                    at(k, q) = s * w * akp + c * akq;
                }
            }
        if (!rotated) break;
    }
    std::vector<double> sv(static_cast<std::size_t>(cols), 0.0);
    for (int c = 0; c < cols; ++c) {
        double norm2 = 0.0;
        for (int k = 0; k < rows; ++k) norm2 += std::norm(at(k, c));
        sv[static_cast<std::size_t>(c)] = std::sqrt(norm2);
    }
    std::sort(sv.rbegin(), sv.rend());
    return sv;
}

}  // namespace

std::vector<double> singular_values(const CDense& m) {
    const int n = m.size();
    std::vector<cx> a(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a[static_cast<std::size_t>(r) * n + c] = m.at(r, c);
    return hestenes_singular_values(n, n, std::move(a));
}

std::vector<double> singular_values(const CMat& m) {
    std::vector<cx> a(static_cast<std::size_t>(m.rows()) * m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) a[static_cast<std::size_t>(r) * m.cols() + c] = m.at(r, c);
    return hestenes_singular_values(m.rows(), m.cols(), std::move(a));
}

double rank1_residual(const CMat& m) {
    std::vector<double> sv = singular_values(m);
    if (sv.empty() || sv[0] == 0.0) return 0.0;
    if (sv.size() < 2) return 0.0;
    return sv[1] / sv[0];
}

double rank1_residual(const CDense& m) {
    std::vector<double> sv = singular_values(m);
    if (sv.empty() || sv[0] == 0.0) return 0.0;
    if (sv.size() < 2) return 0.0;
    return sv[1] / sv[0];
}

double psd_residual(const Hermitian& m) {
    return psd_residual(CDense::from_cmat(m.to_cmat()));
}

double psd_residual(const CDense& m) {
    if (m.size() == 0) return 0.0;
    std::vector<double> ev = hermitian_eigenvalues(m);
    return std::max(0.0, -ev.front());
}

CMat pinv(const CMat& m) {
    // (m^H m)^+ m^H via the Hermitian eigendecomposition of m^H m.
    const int n = m.cols();
    CMat mhm = m.adjoint() * m;
    HermitianEig eig = hermitian_eig(CDense::from_cmat(mhm));
    double lambda_max = 0.0;
    for (double v : eig.values) lambda_max = std::max(lambda_max, v);
    const double cutoff = lambda_max * n * 1e-13;

    CMat inv_core(n);
    for (int k = 0; k < n; ++k) {
        const double lambda = eig.values[static_cast<std::size_t>(k)];
        if (lambda <= cutoff || lambda <= 0.0) continue;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                inv_core.at(r, c) += eig.vectors.at(r, k) * std::conj(eig.vectors.at(c, k)) / lambda;
    }
    return inv_core * m.adjoint();
}

double Mat::inf_norm() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
}

Mat real_embedding(const Hermitian& m) {
    const int n = m.size();
    Mat r(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            r.at(i, j) = m.re(i, j);
            r.at(i, n + j) = m.im(i, j);
            r.at(n + i, j) = -m.im(i, j);
            r.at(n + i, n + j) = m.re(i, j);
        }
    return r;
}

Mat real_embedding(const CDense& m) {
    const int n = m.size();
    Mat r(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cx v = m.at(i, j);
            r.at(i, j) = v.real();
            r.at(i, n + j) = v.imag();
            r.at(n + i, j) = -v.imag();
            r.at(n + i, n + j) = v.real();
        }
    return r;
}

std::vector<double> symmetric_eigenvalues(const Mat& m) {
    assert(m.rows() == m.cols());
    CDense d(m.rows());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) d.at(r, c) = m.at(r, c);
    return hermitian_eigenvalues(d);
}

int lu_solve(Mat a, std::vector<double>& b) {
    const int n = a.rows();
    assert(a.cols() == n && static_cast<int>(b.size()) == n);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) perm[static_cast<std::size_t>(k)] = k;

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a.at(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(a.at(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < 1e-300) return col;
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(a.at(col, c), a.at(pivot, c));
            std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(pivot)]);
        }
        const double d = a.at(col, col);
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / d;
            if (f == 0.0) continue;
            a.at(r, col) = 0.0;
            for (int c = col + 1; c < n; ++c) a.at(r, c) -= f * a.at(col, c);
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= a.at(r, c) * b[static_cast<std::size_t>(c)];
        b[static_cast<std::size_t>(r)] = s / a.at(r, r);
    }
    return -1;
}

}  // namespace triflow
