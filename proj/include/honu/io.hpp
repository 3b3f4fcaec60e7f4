#pragma once

// On-disk forms. Every number is written in shortest round-trip form, so
// reading a file back reproduces the doubles bit for bit.
//
// Series CSV:
//   # generator=<name>
//   # seed=<u64>
//   # dt=<seconds>
//   # <param>=<value>        one line per generator parameter, in order
//   value
//   <sample>                 one per line
//
// Weights CSV:
//   # format=honu-weights/1
//   # n=<inputs>
//   # r=<order>
//   # order_hash=<16 hex digits>
//   q,monomial,weight        monomial = factor indices joined by '.'
//
// The JSON forms carry the same fields.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "honu/datagen.hpp"
#include "honu/format.hpp"
#include "honu/polyops.hpp"
#include "honu/recurrent_unit.hpp"
#include "honu/stability.hpp"
#include "honu/static_unit.hpp"

namespace honu {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw FormatError("bad " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline double parse_number(std::string_view s, std::string_view what) {
  try {
    return parse_double(s);
  } catch (const std::exception&) {
    throw FormatError("bad " + std::string(what) + ": '" + std::string(s) + "'");
  }
}

/// Splits "# key=value" into its parts; nullopt for other lines.
inline std::optional<std::pair<std::string, std::string>> header_line(const std::string& line) {
  if (line.size() < 2 || line[0] != '#') return std::nullopt;
  std::string_view body(line);
  body.remove_prefix(1);
  while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
  const auto eq = body.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  return std::make_pair(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::string monomial_label(const MonomialBasis& basis, std::size_t q) {
  std::string out;
  for (std::size_t m = 0; m < basis.order(); ++m) {
    if (m) out += '.';
    out += std::to_string(basis.factor(q, m));
  }
  return out;
}

}  // namespace detail

// ---- series -------------------------------------------------------------

inline void write_series_csv(std::ostream& os, const TimeSeries& s) {
  os << "# generator=" << s.generator << '\n'
     << "# seed=" << s.seed << '\n'
     << "# dt=" << format_double(s.dt) << '\n';
  for (const auto& [k, v] : s.parameters) os << "# " << k << '=' << v << '\n';
  os << "value\n";
  for (double v : s.samples) os << format_double(v) << '\n';
}

inline TimeSeries read_series_csv(std::istream& is) {
  TimeSeries s;
  std::string line;
  bool in_body = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (!in_body) {
      if (auto kv = detail::header_line(line)) {
        auto& [k, v] = *kv;
        if (k == "generator")
          s.generator = v;
        else if (k == "seed")
          s.seed = detail::parse_u64(v, "seed");
        else if (k == "dt")
          s.dt = detail::parse_number(v, "dt");
        else
          s.parameters.emplace_back(k, v);
        continue;
      }
      if (line == "value") {
        in_body = true;
        continue;
      }
      throw FormatError("series CSV line " + std::to_string(lineno) +
                        ": expected '# key=value' or the 'value' column header");
    }
    if (line.empty()) continue;
    s.samples.push_back(detail::parse_number(line, "sample on line " + std::to_string(lineno)));
  }
  if (!in_body) throw FormatError("series CSV: missing 'value' column header");
  return s;
}

inline void save_series_csv(const std::string& path, const TimeSeries& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  write_series_csv(os, s);
}

inline TimeSeries load_series_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read " + path);
  return read_series_csv(is);
}

// ---- weights ------------------------------------------------------------

inline void write_weights_csv(std::ostream& os, const WeightVector& w) {
  const MonomialBasis& b = *w.basis;
  os << "# format=honu-weights/1\n"
     << "# n=" << b.inputs() << '\n'
     << "# r=" << b.order() << '\n'
     << "# order_hash=" << detail::hash_hex(b.order_hash()) << '\n'
     << "q,monomial,weight\n";
  for (std::size_t q = 0; q < b.size(); ++q)
    os << q << ',' << detail::monomial_label(b, q) << ','
       << format_double(w.values[static_cast<Eigen::Index>(q)]) << '\n';
}

inline WeightVector read_weights_csv(std::istream& is) {
  std::optional<std::size_t> n, r;
  std::string hash;
  std::string line;
  while (std::getline(is, line)) {
    detail::strip_cr(line);
    if (auto kv = detail::header_line(line)) {
      if (kv->first == "n") n = detail::parse_u64(kv->second, "n");
      if (kv->first == "r") r = detail::parse_u64(kv->second, "r");
      if (kv->first == "order_hash") hash = kv->second;
      continue;
    }
    if (line == "q,monomial,weight") break;
    throw FormatError("weights CSV: unexpected line '" + line + "'");
  }
  if (!n || !r) throw FormatError("weights CSV: header lacks n or r");
  auto basis = make_basis(*n, *r);
  if (hash != detail::hash_hex(basis->order_hash()))
    throw FormatError("weights CSV: monomial order hash " + hash + " does not match " +
                      detail::hash_hex(basis->order_hash()));
  Vector v(static_cast<Eigen::Index>(basis->size()));
  std::size_t q = 0;
  while (std::getline(is, line)) {
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw FormatError("weights CSV: malformed row '" + line + "'");
    if (q >= basis->size()) throw FormatError("weights CSV: more rows than n_w");
    if (detail::parse_u64(std::string_view(line).substr(0, c1), "q") != q)
      throw FormatError("weights CSV: rows out of order at q = " + std::to_string(q));
    v[static_cast<Eigen::Index>(q++)] =
        detail::parse_number(std::string_view(line).substr(c2 + 1), "weight");
  }
  if (q != basis->size())
    throw FormatError("weights CSV: " + std::to_string(q) + " rows for n_w = " +
                      std::to_string(basis->size()));
  return WeightVector(basis, std::move(v));
}

inline nlohmann::json weights_to_json(const WeightVector& w) {
  const MonomialBasis& b = *w.basis;
  return {{"format", "honu-weights/1"},
          {"n", b.inputs()},
          {"r", b.order()},
          {"order_hash", detail::hash_hex(b.order_hash())},
          {"weights", std::vector<double>(w.values.data(), w.values.data() + w.values.size())}};
}

inline WeightVector weights_from_json(const nlohmann::json& j) {
  auto basis = make_basis(j.at("n").get<std::size_t>(), j.at("r").get<std::size_t>());
  if (j.at("order_hash").get<std::string>() != detail::hash_hex(basis->order_hash()))
    throw FormatError("weights JSON: monomial order hash mismatch");
  const auto values = j.at("weights").get<std::vector<double>>();
  return WeightVector(basis, Eigen::Map<const Vector>(values.data(),
                                                      static_cast<Eigen::Index>(values.size())));
}

// ---- recurrent state ----------------------------------------------------

namespace detail {

inline nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

/// Snapshot of weights, buffers and the sensitivity matrix D (row-major).
inline nlohmann::json state_to_json(const RecurrentState& s) {
  nlohmann::json d = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.sensitivities.rows(); ++i)
    d.push_back(detail::vector_json(s.sensitivities.row(i).transpose()));
  return {{"format", "honu-recurrent-state/1"},
          {"feedback_taps", s.config.feedback_taps},
          {"external_taps", s.config.external_taps},
          {"horizon", s.config.horizon},
          {"order", s.config.order},
          {"teacher_forcing", s.config.teacher_forcing},
          {"weights", weights_to_json(s.weights)},
          {"feedback", detail::vector_json(s.feedback)},
          {"external", detail::vector_json(s.external)},
          {"feedback_filled", s.feedback_filled},
          {"external_filled", s.external_filled},
          {"sensitivities", std::move(d)}};
}

inline RecurrentState state_from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != "honu-recurrent-state/1")
    throw FormatError("state JSON: unknown format");
  RecurrentConfig cfg;
  cfg.feedback_taps = j.at("feedback_taps").get<std::size_t>();
  cfg.external_taps = j.at("external_taps").get<std::size_t>();
  cfg.horizon = j.at("horizon").get<std::size_t>();
  cfg.order = j.at("order").get<std::size_t>();
  cfg.teacher_forcing = j.at("teacher_forcing").get<bool>();
  RecurrentState s(cfg, weights_from_json(j.at("weights")));
  const Vector fb = detail::vector_from_json(j.at("feedback"));
  const Vector ex = detail::vector_from_json(j.at("external"));
  if (fb.size() != s.feedback.size() || ex.size() != s.external.size())
    throw FormatError("state JSON: buffer sizes do not match the configuration");
  s.feedback = fb;
  s.external = ex;
  s.feedback_filled = j.at("feedback_filled").get<std::size_t>();
  s.external_filled = j.at("external_filled").get<std::size_t>();
  const auto& d = j.at("sensitivities");
  if (d.size() != static_cast<std::size_t>(s.sensitivities.rows()))
    throw FormatError("state JSON: sensitivity matrix has the wrong row count");
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Vector row = detail::vector_from_json(d[i]);
    if (row.size() != s.sensitivities.cols())
      throw FormatError("state JSON: sensitivity row " + std::to_string(i) + " has wrong length");
    s.sensitivities.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return s;
}

// ---- training trace -----------------------------------------------------

/// One row per executed step. Radius columns are empty on steps the
/// monitoring cadence skipped; eta is the scalar rate or the mean of M.
struct TraceRow {
  std::size_t k = 0;  // global step counter over all epochs
  std::size_t epoch = 0;
  double y = 0.0;
  double y_p = 0.0;
  double e = 0.0;
  double eta = 0.0;
  StabilityRecord record;
};

inline constexpr std::string_view trace_schema = "honu-trace/1";
inline constexpr std::string_view trace_csv_header =
    "k,epoch,y,y_p,e,eta,rho_exact,rho_frobenius,mode,action";

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "# schema=" << trace_schema << '\n' << trace_csv_header << '\n';
  for (const auto& t : rows) {
    os << t.k << ',' << t.epoch << ',' << format_double(t.y) << ',' << format_double(t.y_p) << ','
       << format_double(t.e) << ',' << format_double(t.eta) << ','
       << format_optional(t.record.rho_exact) << ',' << format_optional(t.record.rho_frobenius)
       << ',' << to_string(t.record.mode) << ',' << to_string(t.record.action) << '\n';
  }
}

inline nlohmann::json record_to_json(const StabilityRecord& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    if (!v) return nullptr;
    return format_double(*v);
  };
  return {{"k", r.step},
          {"rho_exact", opt(r.rho_exact)},
          {"rho_frobenius", opt(r.rho_frobenius)},
          {"mode", std::string(to_string(r.mode))},
          {"action", to_string(r.action)}};
}

}  // namespace honu
