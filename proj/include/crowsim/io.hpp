#pragma once
#include <Eigen/Dense>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "crowsim/lattice.hpp"
#include "crowsim/scattering.hpp"

namespace crowsim {

// shortest decimal form that round-trips a double
std::string format_g17(double v);

// throws on failure so callers never write into the void
std::ofstream open_output(const std::string& path);

// columns: omega, re/im of all four port amplitudes, RPrime, delay;
// the delay column is the reflection phase slope and may be nan
void write_transport_csv(const std::string& path, const TransportSpectrum& s);

void write_table(const std::string& path, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows);

// sparse text dump: "rows cols nnz" then 1-based "i j re im" per entry
void write_matrix_text(const std::string& path, const Eigen::MatrixXcd& m);

nlohmann::json disorder_to_json(const DisorderSpec& d);
DisorderSpec disorder_from_json(const nlohmann::json& j);

} // namespace crowsim
