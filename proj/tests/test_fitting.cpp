#include <doctest.h>

#include <cmath>

#include "dwiboot/errors.hpp"
#include "dwiboot/fitting.hpp"
#include "dwiboot/phantom.hpp"
#include "dwiboot/rng.hpp"
#include "support.hpp"

using namespace dwiboot;

namespace {

Dictionary dictionary_from_matrix(Eigen::MatrixXd m) {
    Dictionary d;
    d.matrix = std::move(m);
    d.atom_labels.resize(std::size_t(d.matrix.cols()));
    return d;
}

Dictionary default_shore_dict() {
    return shore_dictionary(hcp_like_scheme(), 6, 700.0);
}

} // namespace

TEST_CASE("a unit-column design has leverage 1 and is refused") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 1);
    m(0, 0) = 1.0;
    CHECK_THROWS_AS(build_fit_operator(dictionary_from_matrix(m), 0.0), DegeneracyError);
}

TEST_CASE("constant-column design has leverage 1/3 everywhere") {
    const auto dict = dictionary_from_matrix(Eigen::MatrixXd::Ones(3, 1));
    const auto op = build_fit_operator(dict, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(op.hat_diag(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(op.hat_diag.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hat trace equals the atom count for the default dictionary") {
    const auto op = build_fit_operator(default_shore_dict(), 0.0);
    CHECK(std::abs(op.hat_diag.sum() - 50.0) < 1e-8);
    CHECK(op.hat_diag.maxCoeff() < 1.0);
    CHECK(op.hat_diag.minCoeff() >= 0.0);
}

TEST_CASE("projector H is idempotent at ridge 0") {
    const auto dict = default_shore_dict();
    const auto op = build_fit_operator(dict, 0.0);
    const Eigen::MatrixXd h = dict.matrix * op.pinv;
    CHECK(((h * h - h).array().abs().maxCoeff()) < 1e-8);
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        CHECK(h(i, i) == doctest::Approx(op.hat_diag(i)).epsilon(1e-10));
}

TEST_CASE("underdetermined unregularized fits are refused, ridge rescues them") {
    const auto scheme = hcp_like_scheme(4, {1000.0}, 1); // 4 DW channels
    const auto dict = shore_dictionary(scheme, 6, 700.0); // 50 atoms
    CHECK_THROWS_AS(build_fit_operator(dict, 0.0), DegeneracyError);
    const auto op = build_fit_operator(dict, 1e-3);
    CHECK(op.hat_diag.maxCoeff() < 1.0);
}

TEST_CASE("negative ridge is rejected") {
    CHECK_THROWS_AS(build_fit_operator(default_shore_dict(), -1.0), std::invalid_argument);
}

TEST_CASE("ridge leverage matches the dense formula") {
    const auto dict = default_shore_dict();
    const double ridge = 0.5;
    const auto op = build_fit_operator(dict, ridge);
    const Eigen::MatrixXd gram_inv =
        (dict.matrix.transpose() * dict.matrix +
         ridge * Eigen::MatrixXd::Identity(dict.matrix.cols(), dict.matrix.cols()))
            .inverse();
    for (Eigen::Index i = 0; i < dict.matrix.rows(); i += 17) {
        const double dense =
            (dict.matrix.row(i) * gram_inv * dict.matrix.row(i).transpose()).value();
        CHECK(op.hat_diag(i) == doctest::Approx(dense).epsilon(1e-9));
    }
    CHECK(op.hat_diag.maxCoeff() < 1.0);
    CHECK(op.hat_diag.sum() < 50.0); // shrinkage
}

TEST_CASE("in-span signals produce zero corrected residuals") {
    const auto dict = default_shore_dict();
    const auto op = build_fit_operator(dict, 0.0);
    RngStream rng(3);
    Eigen::VectorXd x(dict.matrix.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    const Eigen::VectorXd y = dict.matrix * x;
    const auto fit = fit_voxel(op, dict, y);
    CHECK(fit.corrected_residuals.norm() <= 1e-9 * y.norm());
    CHECK((fit.fitted - y).norm() <= 1e-9 * y.norm());
}

TEST_CASE("corrected residual divides by sqrt(1 - h)") {
    // two-channel design with h = (3/4, 1/4)
    Eigen::MatrixXd m(2, 1);
    m << std::sqrt(3.0), 1.0;
    const auto dict = dictionary_from_matrix(m);
    const auto op = build_fit_operator(dict, 0.0);
    CHECK(op.hat_diag(0) == doctest::Approx(0.75).epsilon(1e-14));

    // y chosen so the raw residual on channel 0 is exactly 1
    Eigen::VectorXd y(2);
    y << 4.0, 0.0;
    const auto fit = fit_voxel(op, dict, y);
    CHECK(y(0) - fit.fitted(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.corrected_residuals(0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("normal equations hold at ridge 0") {
    const auto dict = default_shore_dict();
    const auto op = build_fit_operator(dict, 0.0);
    const auto y = test::random_volume(1, 1, 1, 270, 5).data;
    const auto fit = fit_voxel(op, dict, Eigen::Map<const Eigen::VectorXd>(y.data(), 270));
    const Eigen::VectorXd raw = Eigen::Map<const Eigen::VectorXd>(y.data(), 270) - fit.fitted;
    CHECK((dict.matrix.transpose() * raw).norm() <=
          1e-8 * (dict.matrix.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), 270)).norm());
}

TEST_CASE("fitting is idempotent and linear") {
    const auto dict = default_shore_dict();
    const auto op = build_fit_operator(dict, 0.0);
    RngStream rng(11);
    Eigen::VectorXd y1(270), y2(270);
    for (Eigen::Index i = 0; i < 270; ++i) {
        y1(i) = 100.0 * rng.uniform01();
        y2(i) = 50.0 * rng.normal();
    }
    const auto f1 = fit_voxel(op, dict, y1);
    const auto f2 = fit_voxel(op, dict, y2);

    const auto refit = fit_voxel(op, dict, f1.fitted);
    CHECK((refit.fitted - f1.fitted).norm() <= 1e-9 * f1.fitted.norm());

    const Eigen::VectorXd combo = 2.0 * y1 - 3.0 * y2;
    const auto fc = fit_voxel(op, dict, combo);
    CHECK((fc.fitted - (2.0 * f1.fitted - 3.0 * f2.fitted)).norm() <= 1e-9 * fc.fitted.norm());
    CHECK((fc.coefficients - (2.0 * f1.coefficients - 3.0 * f2.coefficients)).norm() <=
          1e-9 * fc.coefficients.norm());
}

TEST_CASE("corrected residual variance recovers the noise variance") {
    // Monte-Carlo check of the 1/sqrt(1-h) correction on a small dictionary
    const auto scheme = hcp_like_scheme(20, {1000.0, 2000.0}, 2); // 40 DW
    const auto dict = shore_dictionary(scheme, 2, 700.0);         // 7 atoms
    const auto op = build_fit_operator(dict, 0.0);
    const double sigma = 10.0;

    RngStream rng(99);
    double raw_ss = 0.0, corrected_ss = 0.0;
    std::size_t count = 0;
    Eigen::VectorXd y(40);
    for (int voxel = 0; voxel < 4000; ++voxel) {
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = sigma * rng.normal();
        const auto fit = fit_voxel(op, dict, y);
        raw_ss += (y - fit.fitted).squaredNorm();
        corrected_ss += fit.corrected_residuals.squaredNorm();
        count += std::size_t(y.size());
    }
    const double corrected_var = corrected_ss / double(count);
    const double raw_var = raw_ss / double(count);
    CHECK(corrected_var == doctest::Approx(sigma * sigma).epsilon(0.05));
    // raw residuals are shrunk by about (1 - N_a/N_d)
    CHECK(raw_var / (sigma * sigma) == doctest::Approx(1.0 - 7.0 / 40.0).epsilon(0.05));
}

TEST_CASE("fit_voxel rejects bad input") {
    const auto dict = default_shore_dict();
    const auto op = build_fit_operator(dict, 0.0);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(fit_voxel(op, dict, y), InputError);
    y = Eigen::VectorXd::Zero(270);
    y(3) = std::nan("");
    CHECK_THROWS_AS(fit_voxel(op, dict, y), InputError);
}

TEST_CASE("fit_volume") {
    const auto scheme = hcp_like_scheme(10, {1000.0}, 1); // 10 DW channels
    const auto dict = shore_dictionary(scheme, 2, 700.0);
    const auto op = build_fit_operator(dict, 0.0);
    const auto dwi = test::random_volume(4, 4, 2, 10, 21, 10.0, 200.0);

    SUBCASE("all-false mask gives an empty store") {
        const auto store = fit_volume(op, dict, dwi, Mask::none(4, 4, 2));
        for (std::size_t v = 0; v < store.n_voxels(); ++v) CHECK_FALSE(store.has(v));
    }

    SUBCASE("single-voxel mask reduces to fit_voxel") {
        Mask m = Mask::none(4, 4, 2);
        m.data[13] = 1;
        const auto store = fit_volume(op, dict, dwi, m);
        CHECK(store.has(13));
        CHECK_FALSE(store.has(12));
        const auto direct = fit_voxel(
            op, dict, Eigen::Map<const Eigen::VectorXd>(dwi.data.data() + 13 * 10, 10));
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(store.fitted_at(13)[i] == direct.fitted(Eigen::Index(i)));
            CHECK(store.residuals_at(13)[i] == direct.corrected_residuals(Eigen::Index(i)));
        }
    }

    SUBCASE("results are bit-identical for any worker count") {
        const auto mask = Mask::full(4, 4, 2);
        const auto s1 = fit_volume(op, dict, dwi, mask, 1);
        const auto s4 = fit_volume(op, dict, dwi, mask, 4);
        const auto s7 = fit_volume(op, dict, dwi, mask, 7);
        CHECK(s1.fitted == s4.fitted);
        CHECK(s1.residuals == s4.residuals);
        CHECK(s1.fitted == s7.fitted);
        CHECK(s1.residuals == s7.residuals);
    }

    SUBCASE("all-zero voxels fit to zero without error") {
        Volume4D zeros = Volume4D::create(2, 1, 1, 10);
        const auto store = fit_volume(op, dict, zeros, Mask::full(2, 1, 1));
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(store.fitted_at(0)[i] == 0.0);
            CHECK(store.residuals_at(0)[i] == 0.0);
        }
    }

    SUBCASE("dimension mismatches are input errors") {
        CHECK_THROWS_AS(fit_volume(op, dict, dwi, Mask::full(4, 4, 3)), InputError);
        const auto wrong = test::random_volume(4, 4, 2, 9, 3);
        CHECK_THROWS_AS(fit_volume(op, dict, wrong, Mask::full(4, 4, 2)), InputError);
    }

    SUBCASE("non-finite masked voxel is reported") {
        Volume4D bad = dwi;
        bad.data[5 * 10 + 2] = std::nan("");
        CHECK_THROWS_AS(fit_volume(op, dict, bad, Mask::full(4, 4, 2)), InputError);
    }

    SUBCASE("coefficients stored on request") {
        const auto store = fit_volume(op, dict, dwi, Mask::full(4, 4, 2), 2, true);
        CHECK(store.coefficients.size() == store.n_voxels() * store.n_atoms);
        const auto direct = fit_voxel(
            op, dict, Eigen::Map<const Eigen::VectorXd>(dwi.data.data(), 10));
        for (std::size_t a = 0; a < store.n_atoms; ++a)
            CHECK(store.coefficients_at(0)[a] == direct.coefficients(Eigen::Index(a)));
    }
}
