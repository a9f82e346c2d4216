#include "crowsim/io.hpp"

#include <cstdio>
#include <stdexcept>

#include "crowsim/scattering.hpp"

namespace crowsim {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    return out;
}

void write_transport_csv(const std::string& path, const TransportSpectrum& s) {
    auto out = open_output(path);
    const std::vector<double> delay = group_delay(s);
    out << "omega,re_t,im_t,re_r,im_r,re_rPrime,im_rPrime,re_tPrime,im_tPrime,RPrime,delay\n";
    for (std::size_t i = 0; i < s.omega.size(); ++i) {
        const TransportCoefficients& c = s.coeff[i];
        out << format_g17(s.omega[i]) << ','
            << format_g17(c.t.real()) << ',' << format_g17(c.t.imag()) << ','
            << format_g17(c.r.real()) << ',' << format_g17(c.r.imag()) << ','
            << format_g17(c.rPrime.real()) << ',' << format_g17(c.rPrime.imag()) << ','
            << format_g17(c.tPrime.real()) << ',' << format_g17(c.tPrime.imag()) << ','
            << format_g17(c.RPrime()) << ',' << format_g17(delay[i]) << '\n';
    }
}

void write_table(const std::string& path, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows) {
    auto out = open_output(path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out << (i ? "," : "") << columns[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != columns.size()) {
            throw std::invalid_argument("write_table: row width does not match header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_g17(row[i]);
        }
        out << '\n';
    }
}

void write_matrix_text(const std::string& path, const Eigen::MatrixXcd& m) {
    auto out = open_output(path);
    std::size_t nnz = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > 1e-15) ++nnz;
        }
    }
    out << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > 1e-15) {
                out << (i + 1) << ' ' << (j + 1) << ' '
                    << format_g17(m(i, j).real()) << ' '
                    << format_g17(m(i, j).imag()) << '\n';
            }
        }
    }
}

nlohmann::json disorder_to_json(const DisorderSpec& d) {
    nlohmann::json j;
    j["onsite"] = nlohmann::json::array();
    for (const auto& e : d.onsite) {
        j["onsite"].push_back({{"x", e.x}, {"y", e.y}, {"U", e.U}});
    }
    j["magneticScatterers"] = nlohmann::json::array();
    for (const auto& e : d.magneticScatterers) {
        j["magneticScatterers"].push_back({{"x", e.x},
                                           {"y", e.y},
                                           {"strengthEpsF", e.strengthEpsF},
                                           {"phase", e.phase}});
    }
    j["lossRate"] = d.lossRate;
    return j;
}

namespace {

void reject_unknown(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
        }
    }
}

} // namespace

DisorderSpec disorder_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"onsite", "magneticScatterers", "lossRate"}, "disorder");
    DisorderSpec d;
    if (j.contains("onsite")) {
        for (const auto& e : j.at("onsite")) {
            reject_unknown(e, {"x", "y", "U"}, "disorder.onsite entry");
            d.onsite.push_back({e.at("x").get<int>(), e.at("y").get<int>(),
                                e.at("U").get<double>()});
        }
    }
    if (j.contains("magneticScatterers")) {
        for (const auto& e : j.at("magneticScatterers")) {
            reject_unknown(e, {"x", "y", "strengthEpsF", "phase"},
                           "disorder.magneticScatterers entry");
            d.magneticScatterers.push_back({e.at("x").get<int>(), e.at("y").get<int>(),
                                            e.at("strengthEpsF").get<double>(),
                                            e.at("phase").get<double>()});
        }
    }
    if (j.contains("lossRate")) d.lossRate = j.at("lossRate").get<double>();
    return d;
}

} // namespace crowsim
