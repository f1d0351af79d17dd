// Copyright 2026 The shvprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "shvprobe/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shvprobe/errors.hpp"

namespace shvprobe {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

namespace {

std::string CsvCell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double ParseDouble(const std::string& s, const std::string& file, std::size_t line) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(file, line, "not a number: '" + s + "'");
  }
  return v;
}

std::vector<std::string> ReadLines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

void WriteTextFile(const fs::path& file, const std::string& content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out << content;
}

std::string ReadTextFile(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ReadJsonFile(const fs::path& file) {
  const std::string text = ReadTextFile(file);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string(), 0, e.what());
  }
}

void WriteJsonFile(const fs::path& file, const ordered_json& j) {
  WriteTextFile(file, j.dump(2) + "\n");
}

std::string ShvCsv(const ShvMatrix& matrix) {
  std::string out = "paradigm";
  for (std::size_t h = 0; h < matrix.topology.total(); ++h) out += "," + matrix.topology.label(h);
  out += '\n';
  for (const auto& row : matrix.rows) {
    out += CsvCell(row.paradigm_id);
    for (const auto& e : row.estimates) out += "," + FormatDouble(e.mean);
    out += '\n';
  }
  return out;
}

ordered_json ShvSidecar(const ShvMatrixResult& result, const EstimatorConfig& config,
                        const ordered_json& provenance) {
  ordered_json j;
  j["provenance"] = provenance;
  j["estimator"] = config.to_json();
  j["topology"] = {{"layers", result.matrix.topology.layers()},
                   {"heads_per_layer", result.matrix.topology.heads_per_layer()}};
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < result.matrix.rows.size(); ++r) {
    const auto& row = result.matrix.rows[r];
    ordered_json e;
    e["id"] = row.paradigm_id;
    e["category"] = row.category;
    std::vector<double> variance;
    std::vector<std::size_t> samples;
    std::vector<bool> converged;
    for (const auto& est : row.estimates) {
      variance.push_back(est.variance);
      samples.push_back(est.samples);
      converged.push_back(est.converged);
    }
    e["variance"] = variance;
    e["samples"] = samples;
    e["converged"] = converged;
    if (r < result.reports.size()) {
      e["permutations"] = result.reports[r].permutations;
      e["all_converged"] = result.reports[r].all_converged;
    }
    rows.push_back(std::move(e));
  }
  j["paradigms"] = std::move(rows);
  ordered_json failures = ordered_json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"paradigm", f.paradigm_id}, {"message", f.message}});
  }
  j["failures"] = std::move(failures);
  return j;
}

ShvMatrix ReadShvMatrix(const fs::path& csv) {
  const auto lines = ReadLines(csv);
  const std::string file = csv.string();
  if (lines.empty()) throw ParseError(file, 1, "empty SHV file");
  const auto header = SplitCsvLine(lines[0]);
  if (header.empty() || header[0] != "paradigm") {
    throw ParseError(file, 1, "SHV header must start with 'paradigm'");
  }
  std::size_t layers = 0, heads = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    std::size_t l = 0, h = 0;
    if (std::sscanf(header[c].c_str(), "L%zu.H%zu", &l, &h) != 2) {
      throw ParseError(file, 1, "bad head label '" + header[c] + "'");
    }
    layers = std::max(layers, l + 1);
    heads = std::max(heads, h + 1);
  }
  if (header.size() < 2) throw ParseError(file, 1, "SHV file has no head columns");
  ShvMatrix m;
  m.topology = ModelTopology(layers, heads);
  if (m.topology.total() != header.size() - 1) {
    throw ParseError(file, 1, "head columns do not form a full layer-major grid");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] != m.topology.label(c - 1)) {
      throw ParseError(file, 1, "head column " + header[c] + " out of layer-major order");
    }
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = SplitCsvLine(lines[i]);
    if (cells.size() != header.size()) {
      throw ParseError(file, i + 1, "expected " + std::to_string(header.size()) + " cells");
    }
    for (const auto& seen : m.rows) {
      if (seen.paradigm_id == cells[0]) {
        throw ParseError(file, i + 1, "duplicate paradigm '" + cells[0] + "'");
      }
    }
    ShvVector row;
    row.paradigm_id = cells[0];
    for (std::size_t c = 1; c < cells.size(); ++c) {
      row.estimates.push_back({ParseDouble(cells[c], file, i + 1), 0.0, 0, false});
    }
    m.rows.push_back(std::move(row));
  }

  fs::path sidecar = csv;
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) {
    const json j = ReadJsonFile(sidecar);
    if (j.contains("paradigms")) {
      for (const auto& p : j.at("paradigms")) {
        const auto id = p.at("id").get<std::string>();
        for (auto& row : m.rows) {
          if (row.paradigm_id != id) continue;
          row.category = p.value("category", std::string());
          const auto var = p.value("variance", std::vector<double>());
          const auto samples = p.value("samples", std::vector<std::size_t>());
          const auto conv = p.value("converged", std::vector<bool>());
          for (std::size_t h = 0; h < row.estimates.size(); ++h) {
            if (h < var.size()) row.estimates[h].variance = var[h];
            if (h < samples.size()) row.estimates[h].samples = samples[h];
            if (h < conv.size()) row.estimates[h].converged = conv[h];
          }
        }
      }
    }
  }
  return m;
}

std::string AssignmentsCsv(const std::vector<std::string>& ids,
                           const std::map<std::string, std::string>& categories,
                           const std::vector<Eigen::Index>& clusters) {
  std::string out = "paradigm,category,cluster\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = categories.find(ids[i]);
    out += CsvCell(ids[i]) + "," + CsvCell(it == categories.end() ? "" : it->second) + "," +
           std::to_string(clusters[i]) + "\n";
  }
  return out;
}

Assignments ReadAssignments(const fs::path& csv) {
  const auto lines = ReadLines(csv);
  const std::string file = csv.string();
  if (lines.empty() ||
      SplitCsvLine(lines[0]) != std::vector<std::string>{"paradigm", "category", "cluster"}) {
    throw ParseError(file, 1, "header must be 'paradigm,category,cluster'");
  }
  Assignments a;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = SplitCsvLine(lines[i]);
    if (cells.size() != 3) throw ParseError(file, i + 1, "expected 3 cells");
    if (!a.clusters.emplace(cells[0], cells[2]).second) {
      throw ParseError(file, i + 1, "duplicate paradigm '" + cells[0] + "'");
    }
    a.categories[cells[0]] = cells[1];
  }
  return a;
}

std::string PruneMatrixCsv(const PruneMatrix& matrix) {
  std::string out = "mask_source,baseline";
  for (const auto& id : matrix.paradigm_ids) out += "," + CsvCell(id);
  out += '\n';
  for (std::size_t m = 0; m < matrix.paradigm_ids.size(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    out += CsvCell(matrix.paradigm_ids[m]) + "," + FormatDouble(matrix.baseline[mi]);
    for (Eigen::Index e = 0; e < matrix.delta.cols(); ++e)
      out += "," + FormatDouble(matrix.delta(mi, e));
    out += '\n';
  }
  return out;
}

std::string InertiaCsv(const std::vector<std::pair<Eigen::Index, double>>& curve) {
  std::string out = "k,inertia\n";
  for (const auto& [k, inertia] : curve)
    out += std::to_string(k) + "," + FormatDouble(inertia) + "\n";
  return out;
}

namespace {

constexpr double kWidth = 640, kHeight = 400, kMargin = 50;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string InertiaSvg(const std::vector<std::pair<Eigen::Index, double>>& curve) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\">\n";
  s << "<text x=\"" << kMargin << "\" y=\"25\" font-family=\"sans-serif\">inertia by k</text>\n";
  if (!curve.empty()) {
    const double kmin = static_cast<double>(curve.front().first);
    const double kmax = static_cast<double>(curve.back().first);
    double top = 0;
    for (const auto& p : curve) top = std::max(top, p.second);
    if (top <= 0) top = 1;
    auto x = [&](double k) {
      return kmax > kmin ? kMargin + (k - kmin) / (kmax - kmin) * (kWidth - 2 * kMargin)
                         : kWidth / 2;
    };
    auto y = [&](double v) { return kHeight - kMargin - v / top * (kHeight - 2 * kMargin); };
    s << "<polyline fill=\"none\" stroke=\"black\" points=\"";
    for (const auto& [k, v] : curve) s << Num(x(static_cast<double>(k))) << "," << Num(y(v)) << " ";
    s << "\"/>\n";
    for (const auto& [k, v] : curve) {
      s << "<circle cx=\"" << Num(x(static_cast<double>(k))) << "\" cy=\"" << Num(y(v))
        << "\" r=\"3\"/>\n";
      s << "<text x=\"" << Num(x(static_cast<double>(k)) - 4) << "\" y=\"" << kHeight - kMargin + 18
        << "\" font-size=\"11\">" << k << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string ImpactSvg(const ImpactAnalysis& analysis) {
  std::ostringstream s;
  const std::size_t groups = analysis.clusters.size();
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\">\n";
  s << "<text x=\"" << kMargin
    << "\" y=\"25\" font-family=\"sans-serif\">delta accuracy: in-cluster (grey) vs "
       "out-of-cluster (white)</text>\n";
  const double lo = -1.0, hi = 0.2;
  auto y = [&](double v) {
    v = std::clamp(v, lo, hi);
    return kMargin + (hi - v) / (hi - lo) * (kHeight - 2 * kMargin);
  };
  s << "<line x1=\"" << kMargin << "\" x2=\"" << kWidth - kMargin << "\" y1=\"" << Num(y(0))
    << "\" y2=\"" << Num(y(0)) << "\" stroke=\"#999\"/>\n";
  const double slot = groups ? (kWidth - 2 * kMargin) / static_cast<double>(groups) : 0;
  auto box = [&](std::vector<double> v, double cx, const char* fill) {
    if (v.empty()) return;
    std::sort(v.begin(), v.end());
    auto q = [&](double f) {
      return v[static_cast<std::size_t>(f * static_cast<double>(v.size() - 1))];
    };
    const double w = slot * 0.3;
    s << "<line x1=\"" << Num(cx) << "\" x2=\"" << Num(cx) << "\" y1=\"" << Num(y(v.front()))
      << "\" y2=\"" << Num(y(v.back())) << "\" stroke=\"black\"/>\n";
    s << "<rect x=\"" << Num(cx - w / 2) << "\" y=\"" << Num(y(q(0.75))) << "\" width=\"" << Num(w)
      << "\" height=\"" << Num(std::max(1.0, y(q(0.25)) - y(q(0.75)))) << "\" fill=\"" << fill
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << Num(cx - w / 2) << "\" x2=\"" << Num(cx + w / 2) << "\" y1=\""
      << Num(y(q(0.5))) << "\" y2=\"" << Num(y(q(0.5))) << "\" stroke=\"black\"/>\n";
  };
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& c = analysis.clusters[g];
    const double x0 = kMargin + slot * static_cast<double>(g);
    box(c.impact.in_deltas, x0 + slot * 0.3, "#bbb");
    box(c.impact.out_deltas, x0 + slot * 0.7, "#fff");
    s << "<text x=\"" << Num(x0 + slot * 0.35) << "\" y=\"" << kHeight - kMargin + 18
      << "\" font-size=\"11\">" << c.impact.label << (c.significant ? "*" : "") << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace shvprobe
