#include "dwiboot/fitting.hpp"

#include <cmath>
#include <string>

#include "dwiboot/errors.hpp"

namespace dwiboot {

namespace {

constexpr double kSingularValueCutoff = 1e-12; // relative to the largest
constexpr double kLeverageLimit = 1.0 - 1e-9;

void check_leverage(const Eigen::VectorXd& hat_diag) {
    const double h_max = hat_diag.maxCoeff();
    if (h_max >= kLeverageLimit)
        throw DegeneracyError(
            "leverage h_ii = " + std::to_string(h_max) +
            " reaches 1, so the residual variance correction 1/sqrt(1 - h_ii) degenerates; "
            "use fewer atoms (lower radial order) or a positive ridge");
}

} // namespace

FitOperator build_fit_operator(const Dictionary& dictionary, double ridge) {
    if (ridge < 0.0) throw std::invalid_argument("ridge must be non-negative");
    const Eigen::Index n_d = dictionary.matrix.rows();
    const Eigen::Index n_a = dictionary.matrix.cols();
    if (ridge == 0.0 && n_d <= n_a)
        throw DegeneracyError("need more DW channels than atoms for an unregularized fit (N_d = " +
                              std::to_string(n_d) + ", N_a = " + std::to_string(n_a) +
                              "); use fewer atoms or a positive ridge");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(dictionary.matrix,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? sv(0) * kSingularValueCutoff : 0.0;

    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    if (ridge == 0.0 && rank < n_a)
        throw DegeneracyError("dictionary is rank deficient (rank " + std::to_string(rank) +
                              " of " + std::to_string(n_a) +
                              "); the normal matrix is singular beyond the cutoff");

    // pinv = V diag(s / (s^2 + ridge)) U^T; h_ii = sum_j U_ij^2 s_j^2 / (s_j^2 + ridge).
    // This never materializes H.
    Eigen::VectorXd gain(rank), shrink(rank);
    for (Eigen::Index j = 0; j < rank; ++j) {
        const double s = sv(j);
        gain(j) = s / (s * s + ridge);
        shrink(j) = s * s / (s * s + ridge);
    }
    const auto u = svd.matrixU().leftCols(rank);
    const auto v = svd.matrixV().leftCols(rank);

    FitOperator op;
    op.ridge = ridge;
    op.pinv.noalias() = v * gain.asDiagonal() * u.transpose();
    op.hat_diag.noalias() = u.array().square().matrix() * shrink;
    check_leverage(op.hat_diag);
    op.residual_scale = (1.0 - op.hat_diag.array()).rsqrt();
    return op;
}

namespace {

/// Core of the per-voxel fit, writing through Eigen maps so fit_volume
/// can fill its store without temporaries.
template <typename VecIn, typename VecX, typename VecF, typename VecR>
void fit_into(const FitOperator& op, const Dictionary& dict, const VecIn& y,
              VecX&& coeffs, VecF&& fitted, VecR&& corrected) {
    coeffs.noalias() = op.pinv * y;
    fitted.noalias() = dict.matrix * coeffs;
    corrected = (y - fitted).cwiseProduct(op.residual_scale);
}

} // namespace

VoxelFit fit_voxel(const FitOperator& op, const Dictionary& dictionary,
                   const Eigen::VectorXd& y) {
    if (std::size_t(y.size()) != op.n_channels())
        throw InputError("signal length " + std::to_string(y.size()) +
                         " does not match N_d = " + std::to_string(op.n_channels()));
    if (!y.allFinite()) throw InputError("signal contains non-finite values");
    check_leverage(op.hat_diag);

    VoxelFit fit;
    fit.coefficients.resize(Eigen::Index(op.n_atoms()));
    fit.fitted.resize(y.size());
    fit.corrected_residuals.resize(y.size());
    fit_into(op, dictionary, y, fit.coefficients, fit.fitted, fit.corrected_residuals);
    return fit;
}

FitStore fit_volume(const FitOperator& op, const Dictionary& dictionary,
                    const Volume4D& dwi, const Mask& mask, unsigned threads,
                    bool store_coefficients) {
    dwi.validate();
    mask.require_matches(dwi);
    if (dwi.nc() != op.n_channels())
        throw InputError("volume has " + std::to_string(dwi.nc()) +
                         " channels but the operator expects N_d = " +
                         std::to_string(op.n_channels()));
    check_leverage(op.hat_diag);

    const std::size_t n_vox = dwi.n_voxels();
    const std::size_t n_d = op.n_channels();
    const std::size_t n_a = op.n_atoms();

    FitStore store;
    store.dims = {dwi.dims[0], dwi.dims[1], dwi.dims[2]};
    store.n_channels = n_d;
    store.n_atoms = n_a;
    store.has_fit.assign(n_vox, 0);
    store.fitted.assign(n_vox * n_d, 0.0);
    store.residuals.assign(n_vox * n_d, 0.0);
    if (store_coefficients) store.coefficients.assign(n_vox * n_a, 0.0);

    parallel_for(n_vox, threads, [&](std::size_t vidx) {
        if (!mask.contains(vidx)) return;
        Eigen::Map<const Eigen::VectorXd> y(dwi.data.data() + vidx * n_d, Eigen::Index(n_d));
        if (!y.allFinite())
            throw InputError("non-finite signal at masked voxel " + std::to_string(vidx));
        Eigen::Map<Eigen::VectorXd> fitted(store.fitted.data() + vidx * n_d, Eigen::Index(n_d));
        Eigen::Map<Eigen::VectorXd> corrected(store.residuals.data() + vidx * n_d,
                                              Eigen::Index(n_d));
        if (store_coefficients) {
            Eigen::Map<Eigen::VectorXd> coeffs(store.coefficients.data() + vidx * n_a,
                                               Eigen::Index(n_a));
            fit_into(op, dictionary, y, coeffs, fitted, corrected);
        } else {
            Eigen::VectorXd coeffs(static_cast<Eigen::Index>(n_a));
            fit_into(op, dictionary, y, coeffs, fitted, corrected);
        }
        store.has_fit[vidx] = 1;
    });
    return store;
}

} // namespace dwiboot
