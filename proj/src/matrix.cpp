#include "pfrp/matrix.hpp"

namespace pfrp {

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("matmul_nt: inner dimensions differ");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
            ci[j] = acc;
        }
    }
    return c;
}

Matrix from_row(const std::vector<double>& v) {
    Matrix m(1, v.size());
    m.data = v;
    return m;
}

}  // namespace pfrp
