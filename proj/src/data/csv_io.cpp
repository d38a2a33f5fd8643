#include "attdmm/data/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "attdmm/numcore/errors.hpp"

namespace attdmm {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      std::ostringstream os;
      os << path.filename().string() << ":" << lineno << ": expected " << t.header.size()
         << " fields, got " << fields.size();
      throw DataError(os.str());
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw DataError(path.string() + ": missing header");
  return t;
}

void expect_header(const CsvTable& t, const std::vector<std::string>& expected,
                   const std::filesystem::path& path) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw DataError(path.filename().string() + ": header must be `" + want + "`");
  }
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) {
    throw DataError(where + ": not a finite number: '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, const std::string& where) {
  long v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw DataError(where + ": not an integer: '" + s + "'");
  return v;
}

int parse_binary(const std::string& s, const std::string& where) {
  const long v = parse_int(s, where);
  if (v != 0 && v != 1) throw DataError(where + ": expected 0 or 1, got '" + s + "'");
  return static_cast<int>(v);
}

std::string where(const std::filesystem::path& p, int line, const std::string& field) {
  std::ostringstream os;
  os << p.filename().string() << ":" << line << " field " << field;
  return os.str();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DataError("format_double failed");
  return std::string(buf, p);
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "timeseries.csv", dir / "static.csv", dir / "labels.csv"};
}

RawDataset load_dataset(const DatasetPaths& paths) {
  RawDataset data;
  std::unordered_map<std::string, std::size_t> index;

  {
    const CsvTable ts = read_csv(paths.timeseries);
    if (ts.header.size() < 3 || ts.header[0] != "stay_id" || ts.header[1] != "t_index") {
      throw DataError(paths.timeseries.filename().string() +
                      ": header must be `stay_id,t_index,<feat_1>,...`");
    }
    data.feature_names.assign(ts.header.begin() + 2, ts.header.end());
    const auto M = static_cast<Eigen::Index>(data.feature_names.size());
    std::vector<std::map<long, Eigen::RowVectorXd>> rows;
    for (std::size_t r = 0; r < ts.rows.size(); ++r) {
      const auto& f = ts.rows[r];
      const int line = ts.line_numbers[r];
      auto [it, inserted] = index.try_emplace(f[0], data.stays.size());
      if (inserted) {
        data.stays.push_back(RawStay{f[0], {}, {}, std::nullopt});
        rows.emplace_back();
      }
      auto& stay_rows = rows[it->second];
      const long t = parse_int(f[1], where(paths.timeseries, line, "t_index"));
      if (t < 0 || (!stay_rows.empty() && t <= stay_rows.rbegin()->first)) {
        std::ostringstream os;
        os << paths.timeseries.filename().string() << ":" << line << ": t_index " << t
           << " of stay " << f[0] << " is not increasing";
        throw DataError(os.str());
      }
      Eigen::RowVectorXd v(M);
      for (Eigen::Index i = 0; i < M; ++i) {
        const std::string& cell = f[static_cast<std::size_t>(i) + 2];
        v(i) = cell.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : parse_double(cell, where(paths.timeseries, line,
                                                       data.feature_names[i]));
      }
      stay_rows.emplace(t, v);
    }
    for (std::size_t k = 0; k < data.stays.size(); ++k) {
      const long steps = rows[k].rbegin()->first + 1;
      Matrix values = Matrix::Constant(steps, M, std::numeric_limits<double>::quiet_NaN());
      for (const auto& [t, v] : rows[k]) values.row(t) = v;
      data.stays[k].values = std::move(values);
    }
  }

  {
    const CsvTable st = read_csv(paths.statics);
    expect_header(st, {"stay_id", "age", "aids", "hematologic_malignancy", "metastatic_cancer",
                       "admission_type"},
                  paths.statics);
    std::vector<bool> seen(data.stays.size(), false);
    for (std::size_t r = 0; r < st.rows.size(); ++r) {
      const auto& f = st.rows[r];
      const int line = st.line_numbers[r];
      auto it = index.find(f[0]);
      if (it == index.end()) {
        throw DataError(paths.statics.filename().string() + ": unknown stay_id " + f[0]);
      }
      StaticFeatures& s = data.stays[it->second].statics;
      s.age = parse_double(f[1], where(paths.statics, line, "age"));
      s.aids = parse_binary(f[2], where(paths.statics, line, "aids"));
      s.hematologic_malignancy = parse_binary(f[3], where(paths.statics, line, "hematologic_malignancy"));
      s.metastatic_cancer = parse_binary(f[4], where(paths.statics, line, "metastatic_cancer"));
      s.admission_type = f[5];
      seen[it->second] = true;
    }
    for (std::size_t k = 0; k < seen.size(); ++k) {
      if (!seen[k]) {
        throw DataError(paths.statics.filename().string() + ": no row for stay " +
                        data.stays[k].stay_id);
      }
    }
  }

  if (!paths.labels.empty()) {
    const CsvTable lb = read_csv(paths.labels);
    expect_header(lb, {"stay_id", "label"}, paths.labels);
    for (std::size_t r = 0; r < lb.rows.size(); ++r) {
      const auto& f = lb.rows[r];
      auto it = index.find(f[0]);
      if (it == index.end()) {
        throw DataError(paths.labels.filename().string() + ": unknown stay_id " + f[0]);
      }
      data.stays[it->second].label = parse_binary(f[1], where(paths.labels, lb.line_numbers[r], "label"));
    }
    for (const RawStay& s : data.stays) {
      if (!s.label) {
        throw DataError(paths.labels.filename().string() + ": missing label for stay " + s.stay_id);
      }
    }
  }
  return data;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_dataset(const RawDataset& data, const DatasetPaths& paths) {
  std::ostringstream ts;
  ts << "stay_id,t_index";
  for (const auto& name : data.feature_names) ts << ',' << name;
  ts << '\n';
  std::ostringstream st;
  st << "stay_id,age,aids,hematologic_malignancy,metastatic_cancer,admission_type\n";
  std::ostringstream lb;
  lb << "stay_id,label\n";
  bool all_labeled = true;
  for (const RawStay& s : data.stays) {
    for (Eigen::Index t = 0; t < s.values.rows(); ++t) {
      ts << s.stay_id << ',' << t;
      for (Eigen::Index i = 0; i < s.values.cols(); ++i) {
        ts << ',';
        if (!std::isnan(s.values(t, i))) ts << format_double(s.values(t, i));
      }
      ts << '\n';
    }
    st << s.stay_id << ',' << format_double(s.statics.age) << ',' << s.statics.aids << ','
       << s.statics.hematologic_malignancy << ',' << s.statics.metastatic_cancer << ','
       << s.statics.admission_type << '\n';
    if (s.label) {
      lb << s.stay_id << ',' << *s.label << '\n';
    } else {
      all_labeled = false;
    }
  }
  write_file_atomic(paths.timeseries, ts.str());
  write_file_atomic(paths.statics, st.str());
  if (!paths.labels.empty() && all_labeled) write_file_atomic(paths.labels, lb.str());
}

}  // namespace attdmm
