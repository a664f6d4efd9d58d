#include "koopman/edmd.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "koopman/error.hpp"
#include "parallel.hpp"

namespace koopman {

SnapshotPair build_snapshots(const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw InvalidArgument("no trajectories");
    const double dt = trajectories.front().dt;
    const Eigen::Index n = trajectories.front().dimension();
    Eigen::Index m = 0;
    for (const auto& t : trajectories) {
        if (t.dt != dt) throw InvalidArgument("trajectories have different sampling intervals");
        if (t.dimension() != n) throw InvalidArgument("trajectories have different dimensions");
        m += std::max<Eigen::Index>(t.samples() - 1, 0);
    }
    if (m == 0) throw InvalidArgument("trajectories contain no snapshot pairs");
    SnapshotPair s;
    s.dt = dt;
    s.X.resize(n, m);
    s.Xp.resize(n, m);
    Eigen::Index col = 0;
    for (const auto& t : trajectories) {
        const Eigen::Index len = t.samples() - 1;
        if (len <= 0) continue;
        s.X.middleCols(col, len) = t.states.topRows(len).transpose();
        s.Xp.middleCols(col, len) = t.states.bottomRows(len).transpose();
        col += len;
    }
    return s;
}

DictionaryMatrices apply_dictionary(const ObservableSet& obs, const SnapshotPair& snaps, unsigned threads) {
    if (static_cast<std::size_t>(snaps.X.rows()) != obs.n()) {
        throw InvalidArgument("dictionary is over " + std::to_string(obs.n()) + " states, snapshots have " +
                              std::to_string(snaps.X.rows()));
    }
    const Eigen::Index m = snaps.X.cols();
    DictionaryMatrices dm;
    dm.G.resize(obs.q(), m);
    dm.Gp.resize(obs.q(), m);
    const Eigen::Index chunk = 512;
    const std::size_t blocks = static_cast<std::size_t>((m + chunk - 1) / chunk);
    detail::parallel_for(blocks, threads, [&](std::size_t b) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * chunk;
        const Eigen::Index len = std::min(chunk, m - start);
        try {
            dm.G.middleCols(start, len) = obs.evaluate_columns(snaps.X.middleCols(start, len));
            dm.Gp.middleCols(start, len) = obs.evaluate_columns(snaps.Xp.middleCols(start, len));
        } catch (const EvalError& e) {
            throw EvalError(std::string(e.what()) + " (block starting at column " + std::to_string(start) + ")");
        }
    });
    return dm;
}

FitResult fit(const DictionaryMatrices& dm, double sv_rel_tol) {
    if (dm.G.rows() != dm.Gp.rows() || dm.G.cols() != dm.Gp.cols()) {
        throw InvalidArgument("G and G+ have different shapes");
    }
    if (dm.G.size() == 0) throw InvalidArgument("empty dictionary matrices");
    if (!(sv_rel_tol >= 0.0)) throw InvalidArgument("sv_rel_tol must be nonnegative");
    FitResult r;
    const Eigen::Index q = dm.G.rows(), m = dm.G.cols();
    if (m < q) {
        r.warnings.push_back("fewer snapshots (" + std::to_string(m) + ") than observables (" + std::to_string(q) +
                             ")");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(dm.G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    r.singular_values = svd.singularValues();
    const double smax = r.singular_values.size() ? r.singular_values[0] : 0.0;
    if (!(smax > 0.0)) throw NumericalError("dictionary matrix is zero");
    const double cut = sv_rel_tol * smax;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(r.singular_values.size());
    for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
        if (r.singular_values[i] > cut) {
            inv[i] = 1.0 / r.singular_values[i];
            ++r.rank;
        }
    }
    if (r.rank == 0) throw NumericalError("all singular values are below the tolerance");
    if (r.rank < std::min(q, m)) {
        r.warnings.push_back("dictionary matrix is rank deficient: rank " + std::to_string(r.rank) + " of " +
                             std::to_string(std::min(q, m)));
    }
    r.K = (dm.Gp * svd.matrixV()) * inv.asDiagonal() * svd.matrixU().transpose();
    r.residual = (dm.Gp - r.K * dm.G).norm();
    return r;
}

namespace {

bool spectrum_before(std::complex<double> a, std::complex<double> b) {
    if (a.real() != b.real()) return a.real() > b.real();
    if (std::abs(a.imag()) != std::abs(b.imag())) return std::abs(a.imag()) < std::abs(b.imag());
    return a.imag() > b.imag();
}

}  // namespace

KoopmanDecomposition decompose(const Eigen::MatrixXd& K, const ObservableSet& dictionary, double dt) {
    if (K.rows() != K.cols()) throw InvalidArgument("K must be square");
    if (static_cast<std::size_t>(K.rows()) != dictionary.q()) {
        throw InvalidArgument("K is " + std::to_string(K.rows()) + "x" + std::to_string(K.rows()) +
                              " but the dictionary has " + std::to_string(dictionary.q()) + " entries");
    }
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!dictionary.identity_leading()) throw InvalidArgument("dictionary must start with the state coordinates");
    if (!K.allFinite()) throw NumericalError("K has non-finite entries");

    const Eigen::Index q = K.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(K, true);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of K failed");
    Eigen::VectorXcd ld = es.eigenvalues();
    Eigen::MatrixXcd V = es.eigenvectors();

    std::vector<std::complex<double>> lc(q);
    for (Eigen::Index i = 0; i < q; ++i) {
        if (ld[i] == 0.0) throw NumericalError("K has a zero eigenvalue; no continuous-time logarithm");
        lc[i] = std::log(ld[i]) / dt;
    }
    std::vector<Eigen::Index> order(q);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return spectrum_before(lc[a], lc[b]); });

    KoopmanDecomposition dec{K, dt, Eigen::VectorXcd(q), Eigen::VectorXcd(q), Eigen::MatrixXcd(q, q),
                             Eigen::MatrixXcd(), Eigen::MatrixXcd(), dictionary};
    for (Eigen::Index i = 0; i < q; ++i) {
        dec.lambda_d[i] = ld[order[i]];
        dec.lambda_c[i] = lc[order[i]];
        Eigen::VectorXcd v = V.col(order[i]);
        dec.Rv.col(i) = v / v.norm();
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> sv(dec.Rv);
    const double cond = sv.singularValues()[0] / sv.singularValues()[q - 1];
    if (!(cond <= 1e10)) {
        throw NumericalError("K is numerically defective (eigenvector condition number " + std::to_string(cond) + ")");
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(dec.Rv);
    dec.L = lu.inverse();
    const double bio = (dec.L * dec.Rv - Eigen::MatrixXcd::Identity(q, q)).cwiseAbs().maxCoeff();
    const double eig = (K.cast<std::complex<double>>() * dec.Rv - dec.Rv * dec.lambda_d.asDiagonal()).norm() /
                       std::max(1.0, K.norm());
    if (!(bio <= 1e-8) || !(eig <= 1e-8)) {
        throw NumericalError("K is numerically defective (|L Rv - I| = " + std::to_string(bio) +
                             ", eigen residual = " + std::to_string(eig) + ")");
    }
    dec.U = dec.Rv.topRows(dictionary.n());
    return dec;
}

Eigen::VectorXcd eigenfunctions(const KoopmanDecomposition& dec, std::span<const double> x) {
    return dec.L * dec.dictionary.evaluate(x).cast<std::complex<double>>();
}

Prediction predict(const KoopmanDecomposition& dec, std::span<const double> x0, int steps) {
    if (steps < 0) throw InvalidArgument("steps must be nonnegative");
    const Eigen::VectorXcd phi = eigenfunctions(dec, x0);
    const Eigen::Index n = dec.U.rows();
    Prediction p;
    p.trajectory.dt = dec.dt;
    p.trajectory.states.resize(steps + 1, n);
    for (int k = 0; k <= steps; ++k) {
        Eigen::VectorXcd pw(dec.lambda_d.size());
        for (Eigen::Index i = 0; i < pw.size(); ++i) pw[i] = std::pow(dec.lambda_d[i], k) * phi[i];
        Eigen::VectorXcd x = dec.U * pw;
        p.trajectory.states.row(k) = x.real().transpose();
        if (x.imag().size() > 0) p.max_imag = std::max(p.max_imag, x.imag().cwiseAbs().maxCoeff());
    }
    return p;
}

PrincipalPair principal_eigenpair(const KoopmanDecomposition& dec, std::complex<double> reference) {
    PrincipalPair best;
    bool found = false;
    for (Eigen::Index i = 0; i < dec.lambda_c.size(); ++i) {
        const auto l = dec.lambda_c[i];
        if (!(l.imag() > 0.0)) continue;
        // a real eigenvalue of K on the negative axis has no conjugate partner
        if (dec.lambda_d[i].imag() == 0.0) continue;
        const double d = std::abs(l - std::complex<double>(reference.real(), std::abs(reference.imag())));
        if (!found || d < best.distance) {
            best = {l, static_cast<std::size_t>(i), d};
            found = true;
        }
    }
    if (!found) throw InvalidArgument("spectrum has no complex-conjugate pair");
    return best;
}

void write_spectrum_csv(std::ostream& os, const KoopmanDecomposition& dec,
                        std::optional<std::size_t> principal_index) {
    os << "re_c,im_c,re_d,im_d,freq_hz,damping_pct,is_principal\n" << std::setprecision(17);
    std::optional<std::complex<double>> principal;
    if (principal_index) principal = dec.lambda_c[static_cast<Eigen::Index>(*principal_index)];
    for (Eigen::Index i = 0; i < dec.lambda_c.size(); ++i) {
        const auto l = dec.lambda_c[i];
        const bool is_p = principal && (l == *principal || l == std::conj(*principal));
        os << l.real() << ',' << l.imag() << ',' << dec.lambda_d[i].real() << ',' << dec.lambda_d[i].imag() << ','
           << frequency_hz(l) << ',' << 100.0 * damping_ratio(l) << ',' << (is_p ? 1 : 0) << "\n";
    }
}

namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

json complex_matrix_json(const Eigen::MatrixXcd& M) {
    return json{{"re", matrix_json(M.real())}, {"im", matrix_json(M.imag())}};
}

Eigen::MatrixXd matrix_from(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw InvalidArgument("ragged matrix in model");
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = j.at(i).at(c).get<double>();
    }
    return M;
}

Eigen::MatrixXcd complex_matrix_from(const json& j) {
    Eigen::MatrixXd re = matrix_from(j.at("re")), im = matrix_from(j.at("im"));
    if (re.rows() != im.rows() || re.cols() != im.cols()) throw InvalidArgument("complex matrix shape mismatch");
    Eigen::MatrixXcd M(re.rows(), re.cols());
    M.real() = re;
    M.imag() = im;
    return M;
}

const char* kind_name(DictionaryKind k) {
    switch (k) {
        case DictionaryKind::Lie:
            return "lie";
        case DictionaryKind::Monomial:
            return "monomial";
        case DictionaryKind::Rbf:
            return "rbf";
    }
    return "?";
}

json dictionary_json(const ObservableSet& obs) {
    json entries = json::array();
    for (const auto& e : obs.entries()) {
        json item{{"expr", to_string(e.expr)}};
        if (e.rbf_center) item["rbf_center"] = *e.rbf_center;
        entries.push_back(std::move(item));
    }
    json params = json::object();
    for (const auto& [k, v] : obs.parameters()) params[k] = v;
    return json{{"kind", kind_name(obs.kind())},
                {"degree", obs.degree()},
                {"state_names", obs.state_names()},
                {"parameters", params},
                {"entries", entries}};
}

ObservableSet dictionary_from(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    DictionaryKind k;
    if (kind == "lie") {
        k = DictionaryKind::Lie;
    } else if (kind == "monomial") {
        k = DictionaryKind::Monomial;
    } else if (kind == "rbf") {
        k = DictionaryKind::Rbf;
    } else {
        throw InvalidArgument("unknown dictionary kind '" + kind + "'");
    }
    Env params;
    for (const auto& [name, v] : j.at("parameters").items()) params[name] = v.get<double>();
    std::vector<Observable> entries;
    for (const auto& e : j.at("entries")) {
        Observable o{parse(e.at("expr").get<std::string>()), std::nullopt};
        if (e.contains("rbf_center")) o.rbf_center = e.at("rbf_center").get<std::vector<double>>();
        entries.push_back(std::move(o));
    }
    ObservableSet obs(k, j.at("state_names").get<std::vector<std::string>>(), std::move(entries), params);
    obs.set_degree(j.at("degree").get<int>());
    return obs;
}

}  // namespace

std::string save_model(const KoopmanDecomposition& dec) {
    json lam = json::array();
    for (Eigen::Index i = 0; i < dec.lambda_d.size(); ++i) {
        lam.push_back({dec.lambda_d[i].real(), dec.lambda_d[i].imag()});
    }
    json doc{{"format", "koopman-edmd"},
             {"version", 1},
             {"dt", dec.dt},
             {"dictionary", dictionary_json(dec.dictionary)},
             {"K", matrix_json(dec.K)},
             {"lambda_d", lam},
             {"Rv", complex_matrix_json(dec.Rv)},
             {"L", complex_matrix_json(dec.L)},
             {"U", complex_matrix_json(dec.U)}};
    return doc.dump(1);
}

KoopmanDecomposition load_model(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model document: ") + e.what(), e.byte);
    }
    try {
        if (doc.at("format").get<std::string>() != "koopman-edmd") throw InvalidArgument("not a model document");
        KoopmanDecomposition dec{matrix_from(doc.at("K")),
                                 doc.at("dt").get<double>(),
                                 {},
                                 {},
                                 complex_matrix_from(doc.at("Rv")),
                                 complex_matrix_from(doc.at("L")),
                                 complex_matrix_from(doc.at("U")),
                                 dictionary_from(doc.at("dictionary"))};
        const auto& lam = doc.at("lambda_d");
        const auto q = static_cast<Eigen::Index>(lam.size());
        dec.lambda_d.resize(q);
        dec.lambda_c.resize(q);
        for (Eigen::Index i = 0; i < q; ++i) {
            dec.lambda_d[i] = {lam.at(i).at(0).get<double>(), lam.at(i).at(1).get<double>()};
            dec.lambda_c[i] = std::log(dec.lambda_d[i]) / dec.dt;
        }
        const auto qq = static_cast<Eigen::Index>(dec.dictionary.q());
        if (dec.K.rows() != qq || dec.K.cols() != qq || q != qq || dec.Rv.rows() != qq || dec.L.rows() != qq ||
            dec.U.rows() != static_cast<Eigen::Index>(dec.dictionary.n()) || dec.U.cols() != qq) {
            throw InvalidArgument("model matrices do not match the dictionary size");
        }
        return dec;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("model document: ") + e.what());
    }
}

}  // namespace koopman
