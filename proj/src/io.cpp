#include "kanlab/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kanlab/error.hpp"

namespace kanlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string provenance_line(const Provenance& p) {
  return "# kanlab " + p.tool_version + " config=" + p.config_hash + "\n";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const std::string& where) {
  std::size_t b = cell.find_first_not_of(" \t");
  std::size_t e = cell.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw MalformedFileError(where + ": empty field");
  const std::string s = cell.substr(b, e - b + 1);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw MalformedFileError(where + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_trajectory_csv(const fs::path& path, const Trajectory& traj,
                          const Provenance& provenance) {
  std::string text = provenance_line(provenance);
  if (traj.kind == TrajectoryKind::flow_samples) text += "# dt=" + format_double(traj.dt) + "\n";
  for (std::size_t i = 0; i < traj.component_names.size(); ++i) {
    if (i) text += ',';
    text += traj.component_names[i];
  }
  text += '\n';
  for (const Vec& s : traj.states) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (i) text += ',';
      text += format_double(s[i]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

Trajectory read_trajectory_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  const std::string name = path.string();
  Trajectory traj;
  std::string line;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      const auto pos = line.find("dt=");
      if (pos != std::string::npos && line.find("kanlab") == std::string::npos) {
        traj.kind = TrajectoryKind::flow_samples;
        traj.dt = parse_number(line.substr(pos + 3), where);
        if (!(traj.dt > 0.0)) throw MalformedFileError(where + ": dt must be positive");
      }
      continue;
    }
    const auto cells = split_csv(line);
    if (!have_header) {
      for (const auto& c : cells) {
        if (c.empty()) throw MalformedFileError(where + ": empty column name");
        traj.component_names.push_back(c);
      }
      have_header = true;
      continue;
    }
    if (cells.size() != traj.component_names.size()) {
      throw MalformedFileError(where + ": expected " +
                               std::to_string(traj.component_names.size()) + " fields");
    }
    Vec s(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      s[static_cast<Eigen::Index>(i)] = parse_number(cells[i], where);
      if (!std::isfinite(s[static_cast<Eigen::Index>(i)])) {
        throw MalformedFileError(where + ": non-finite value");
      }
    }
    traj.states.push_back(std::move(s));
  }
  if (!have_header) throw MalformedFileError(name + ": missing header row");
  return traj;
}

void write_losses_csv(const fs::path& path, const TrainingReport& report,
                      const Provenance& provenance) {
  if (report.train_loss.size() != report.test_loss.size()) {
    throw InvalidInputError("loss curves differ in length");
  }
  std::string text = provenance_line(provenance);
  text += "step,train_loss,test_loss\n";
  for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
    text += std::to_string(i + 1) + ',' + format_double(report.train_loss[i]) + ',' +
            format_double(report.test_loss[i]) + '\n';
  }
  write_text_file(path, text);
}

std::string model_to_json(const KanNetwork& net, const Provenance& provenance) {
  json doc;
  doc["format"] = "kanlab-model";
  doc["format_version"] = kModelFormatVersion;
  doc["tool_version"] = provenance.tool_version;
  doc["config_hash"] = provenance.config_hash;
  doc["shape"] = net.shape();
  json layers = json::array();
  for (const KanLayer& layer : net.layers()) {
    json edges = json::array();
    for (const SplineActivation& e : layer.edges()) {
      edges.push_back({{"degree", e.spec.degree},
                       {"grid_size", e.spec.grid_size},
                       {"range", {e.spec.lo, e.spec.hi}},
                       {"knots", e.knots},
                       {"coeffs", e.coeffs},
                       {"w_base", e.w_base},
                       {"w_spline", e.w_spline},
                       {"frozen", e.frozen}});
    }
    layers.push_back({{"in", layer.in_dim()}, {"out", layer.out_dim()}, {"edges", edges}});
  }
  doc["layers"] = layers;
  return doc.dump(1) + "\n";
}

KanNetwork model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedFileError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("format_version")) {
      throw MalformedFileError("model file has no format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw VersionMismatchError("model format version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    }
    const auto shape = doc.at("shape").get<std::vector<int>>();
    const json& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() + 1 != shape.size()) {
      throw MalformedFileError("layer count does not match shape");
    }
    std::vector<KanLayer> built;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const json& jl = layers[l];
      const int in = jl.at("in").get<int>();
      const int out = jl.at("out").get<int>();
      if (in != shape[l] || out != shape[l + 1] || in < 1 || out < 1) {
        throw MalformedFileError("layer " + std::to_string(l) + " dimensions do not match shape");
      }
      const json& je = jl.at("edges");
      if (!je.is_array() || je.size() != static_cast<std::size_t>(in) * out) {
        throw MalformedFileError("layer " + std::to_string(l) + " has the wrong edge count");
      }
      KanLayer layer(in, out, SplineSpec{});
      for (std::size_t i = 0; i < je.size(); ++i) {
        const json& e = je[i];
        SplineActivation act;
        act.spec.degree = e.at("degree").get<int>();
        act.spec.grid_size = e.at("grid_size").get<int>();
        const auto range = e.at("range").get<std::vector<double>>();
        if (range.size() != 2) throw MalformedFileError("edge range must have two entries");
        act.spec.lo = range[0];
        act.spec.hi = range[1];
        act.knots = e.at("knots").get<std::vector<double>>();
        act.coeffs = e.at("coeffs").get<std::vector<double>>();
        act.w_base = e.at("w_base").get<double>();
        act.w_spline = e.at("w_spline").get<double>();
        act.frozen = e.at("frozen").get<bool>();
        layer.edges()[i] = std::move(act);
      }
      built.push_back(std::move(layer));
    }
    KanNetwork net(std::move(built));
    net.validate();
    return net;
  } catch (const LoadError&) {
    throw;
  } catch (const json::exception& e) {
    throw MalformedFileError(std::string("malformed model file: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw MalformedFileError(std::string("model file describes an invalid network: ") +
                             e.what());
  }
}

void save_model(const KanNetwork& net, const fs::path& path, const Provenance& provenance) {
  write_text_file(path, model_to_json(net, provenance));
}

KanNetwork load_model(const fs::path& path) {
  return model_from_json(read_text_file(path));
}

std::string diagnostics_to_json(const DiagnosticsReport& report, const Provenance& provenance) {
  json doc;
  doc["tool_version"] = provenance.tool_version;
  doc["config_hash"] = provenance.config_hash;
  doc["system"] = report.system;
  auto spectrum = [&](const char* prefix, const std::optional<LyapunovSpectrum>& s) {
    const std::string p = prefix;
    if (!s) {
      doc[p + "_lyapunov"] = nullptr;
      return;
    }
    doc[p + "_lyapunov"] = s->exponents;
    doc[p + "_lyapunov_sum"] = s->sum();
    doc[p + "_lyapunov_units"] = to_string(s->units);
    doc[p + "_lyapunov_steps"] = s->steps;
  };
  spectrum("true", report.true_lyapunov);
  spectrum("model", report.model_lyapunov);
  doc["kl"] = report.kl;
  doc["histogram_bins"] = report.histogram_bins;
  doc["histogram_lo"] = report.histogram_lo;
  doc["histogram_hi"] = report.histogram_hi;
  doc["smoothing"] = report.smoothing;
  doc["corr_dim_true"] = report.corr_dim_true;
  doc["corr_dim_model"] = report.corr_dim_model;
  doc["corr_dim_difference"] = std::abs(report.corr_dim_true - report.corr_dim_model);
  doc["radii"] = report.radii;
  doc["spectrum_component"] = report.spectrum_component;
  doc["spectral_resolution"] = report.spectral_resolution;
  auto peaks = [](const std::vector<SpectralPeak>& list) {
    json out = json::array();
    for (const auto& pk : list) {
      out.push_back({{"bin", pk.bin}, {"frequency", pk.frequency}, {"power", pk.power}});
    }
    return out;
  };
  doc["peaks_true"] = peaks(report.true_peaks);
  doc["peaks_model"] = peaks(report.model_peaks);
  if (report.model_error) {
    doc["model_error_sup"] = report.model_error->sup;
    doc["model_error_mean"] = report.model_error->mean;
  } else {
    doc["model_error_sup"] = nullptr;
    doc["model_error_mean"] = nullptr;
  }
  doc["reference_points"] = report.reference_points;
  doc["model_points"] = report.model_points;
  for (const auto& [key, value] : report.settings) doc[key] = value;
  return doc.dump(1) + "\n";
}

void write_diagnostics_json(const fs::path& path, const DiagnosticsReport& report,
                            const Provenance& provenance) {
  write_text_file(path, diagnostics_to_json(report, provenance));
}

}  // namespace kanlab
