#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "attdmm/data/checkpoint.hpp"
#include "attdmm/data/csv_io.hpp"
#include "attdmm/data/preprocess.hpp"
#include "attdmm/data/synth.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/scoring/risk.hpp"
#include "helpers.hpp"

using namespace attdmm;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("attdmm_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kStatic =
    "stay_id,age,aids,hematologic_malignancy,metastatic_cancer,admission_type\n"
    "a,70,0,1,0,EMERGENCY\n";

bool same_or_both_nan(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::isnan(a(i)) != std::isnan(b(i))) return false;
    if (!std::isnan(a(i)) && a(i) != b(i)) return false;
  }
  return true;
}

RawStay raw_stay(const std::string& id, const Matrix& v, double age = 60.0,
                 const std::string& type = "URGENT") {
  RawStay s;
  s.stay_id = id;
  s.values = v;
  s.statics.age = age;
  s.statics.admission_type = type;
  s.label = 0;
  return s;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("CSV loading") {
  const fs::path dir = scratch("load");
  write(dir / "static.csv", kStatic);
  write(dir / "labels.csv", "stay_id,label\na,1\n");
  const DatasetPaths paths = DatasetPaths::in_directory(dir);

  SUBCASE("one complete stay") {
    write(dir / "timeseries.csv", "stay_id,t_index,hr,sbp\na,0,80,120\na,1,82,118\n");
    const RawDataset d = load_dataset(paths);
    REQUIRE(d.stays.size() == 1);
    CHECK(d.feature_names == std::vector<std::string>{"hr", "sbp"});
    CHECK(d.stays[0].values.rows() == 2);
    CHECK(observed_mask(d.stays[0].values).minCoeff() == 1.0);
    CHECK(d.stays[0].label == 1);
    CHECK(d.stays[0].statics.hematologic_malignancy == 1);
    CHECK(d.stays[0].statics.admission_type == "EMERGENCY");
  }
  SUBCASE("empty fields are missing") {
    write(dir / "timeseries.csv", "stay_id,t_index,hr,sbp\na,0,,120\na,1,82,\n");
    const Matrix m = observed_mask(load_dataset(paths).stays[0].values);
    CHECK(m(0, 0) == 0.0);
    CHECK(m(0, 1) == 1.0);
    CHECK(m(1, 1) == 0.0);
  }
  SUBCASE("missing label names the stay") {
    write(dir / "timeseries.csv", "stay_id,t_index,hr\na,0,1\nb,0,2\n");
    write(dir / "static.csv", std::string(kStatic) + "b,50,0,0,0,ELECTIVE\n");
    try {
      load_dataset(paths);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("b") != std::string::npos);
      CHECK(std::string(e.what()).find("label") != std::string::npos);
    }
  }
  SUBCASE("contract errors") {
    write(dir / "timeseries.csv", "stay_id,t_index,hr,sbp\na,0,80\n");
    CHECK_THROWS_AS(load_dataset(paths), DataError);
    write(dir / "timeseries.csv", "stay_id,t_index,hr\na,1,80\na,0,81\n");
    CHECK_THROWS_AS(load_dataset(paths), DataError);
    write(dir / "timeseries.csv", "stay_id,t_index,hr\na,0,80\n");
    write(dir / "labels.csv", "stay_id,label\na,1\nzzz,0\n");
    CHECK_THROWS_AS(load_dataset(paths), DataError);
  }
  fs::remove_all(dir);
}

TEST_CASE("synthetic dataset round trip is lossless") {
  SynthConfig sc;
  sc.records = 30;
  sc.min_steps = 3;
  sc.max_steps = 9;
  sc.seed = 4;
  const RawDataset d = synth_generate(sc).data;
  const fs::path dir = scratch("roundtrip");
  write_dataset(d, DatasetPaths::in_directory(dir));
  const RawDataset back = load_dataset(DatasetPaths::in_directory(dir));
  REQUIRE(back.stays.size() == d.stays.size());
  CHECK(back.feature_names == d.feature_names);
  for (std::size_t i = 0; i < d.stays.size(); ++i) {
    CHECK(back.stays[i].stay_id == d.stays[i].stay_id);
    CHECK(back.stays[i].statics == d.stays[i].statics);
    CHECK(back.stays[i].label == d.stays[i].label);
    CHECK(same_or_both_nan(back.stays[i].values, d.stays[i].values));
  }
  fs::remove_all(dir);
}

TEST_CASE("imputation") {
  Vector raw(5);
  raw << kNaN, 2, kNaN, 4, kNaN;
  const ImputedSeries s = impute_and_mask(raw, 0.0);
  CHECK(s.values == (Vector(5) << 2, 2, 3, 4, 4).finished());
  CHECK(s.mask == (Vector(5) << 0, 1, 0, 1, 0).finished());

  Vector full(3);
  full << 1, -2, 5;
  const ImputedSeries f = impute_and_mask(full, 9.0);
  CHECK(f.values == full);
  CHECK(f.mask.minCoeff() == 1.0);

  const ImputedSeries e = impute_and_mask(Vector::Constant(4, kNaN), 1.5);
  CHECK(e.values == Vector::Constant(4, 1.5));
  CHECK(e.mask.maxCoeff() == 0.0);

  Vector gap(6);
  gap << 0, kNaN, kNaN, kNaN, 8, kNaN;
  CHECK(impute_and_mask(gap, 0.0).values == (Vector(6) << 0, 2, 4, 6, 8, 8).finished());
}

TEST_CASE("normalizer") {
  Matrix a(3, 2), b(2, 2);
  a << 5, 1, 5, kNaN, 5, 3;
  b << 5, 10, kNaN, 2;
  const std::vector<RawStay> train{raw_stay("a", a, 40, "ELECTIVE"), raw_stay("b", b, 80, "URGENT")};
  Normalizer n;
  CHECK_THROWS_AS(n.apply(train[0]), ContractViolation);
  n.fit(train);
  const std::vector<PatientRecord> r = n.apply(train);

  SUBCASE("constant feature standardizes to zero") {
    for (const auto& rec : r) CHECK(rec.x.col(0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("observed training cells have mean 0 and sd 1") {
    double sum = 0, sq = 0;
    int cnt = 0;
    for (const auto& rec : r) {
      for (int t = 0; t < rec.steps(); ++t) {
        if (rec.m(t, 1) == 1.0) {
          sum += rec.x(t, 1);
          sq += rec.x(t, 1) * rec.x(t, 1);
          ++cnt;
        }
      }
    }
    CHECK(cnt == 4);
    CHECK(sum / cnt == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(sq / cnt == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a later split uses the training statistics") {
    Matrix c(2, 2);
    c << 6, 20, 7, 22;
    const PatientRecord t = n.apply(raw_stay("c", c, 60));
    CHECK(t.x.col(1).mean() > 1.0);
    CHECK(t.x(0, 0) > 0.0);
  }
  SUBCASE("inverse transform on observed cells") {
    const Matrix back = n.inverse_features(r[1].x);
    CHECK(std::abs(back(0, 1) - 10.0) < 1e-9);
    CHECK(std::abs(back(1, 1) - 2.0) < 1e-9);
    CHECK(std::abs(back(0, 0) - 5.0) < 1e-9);
    CHECK(std::abs(n.inverse_age(r[0].s(0)) - 40.0) < 1e-9);
  }
  SUBCASE("static encoding") {
    CHECK(n.static_dim() == 6);
    CHECK(r[0].s.size() == 6);
    CHECK(r[0].s(0) == doctest::Approx(-1.0));
    CHECK(r[0].s.tail(2) == (Vector(2) << 1, 0).finished());
    const Vector unseen = n.encode_statics(raw_stay("z", a, 60, "TRAUMA").statics);
    CHECK(unseen.tail(2).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("record order does not change per-record outputs") {
    const std::vector<RawStay> rev{train[1], train[0]};
    const std::vector<PatientRecord> rr = n.apply(rev);
    CHECK(rr[0].x == r[1].x);
    CHECK(rr[1].m == r[0].m);
  }
}

TEST_CASE("synthetic generator") {
  SynthConfig sc;
  sc.records = 50;
  sc.min_steps = 4;
  sc.max_steps = 10;
  sc.seed = 9;
  const SynthResult a = synth_generate(sc);

  SUBCASE("deterministic per seed") {
    const SynthResult b = synth_generate(sc);
    for (std::size_t i = 0; i < a.data.stays.size(); ++i) {
      CHECK(same_or_both_nan(a.data.stays[i].values, b.data.stays[i].values));
      CHECK(a.data.stays[i].label == b.data.stays[i].label);
    }
    CHECK(a.truth.offset == b.truth.offset);
  }
  SUBCASE("step range and stability") {
    for (const auto& s : a.data.stays) {
      CHECK(s.values.rows() >= 4);
      CHECK(s.values.rows() <= 10);
    }
    const Eigen::EigenSolver<Matrix> es(a.truth.lgssm.A);
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(sc.spectral_radius).epsilon(1e-9));
  }
  SUBCASE("missing rate 0 gives complete masks") {
    SynthConfig full = sc;
    full.missing_rate = 0.0;
    for (const auto& s : synth_generate(full).data.stays) CHECK(observed_mask(s.values).minCoeff() == 1.0);
  }
  SUBCASE("labels do not depend on observation noise") {
    SynthConfig other = sc;
    other.observation_seed = 12345;
    const SynthResult b = synth_generate(other);
    bool any_value_differs = false;
    for (std::size_t i = 0; i < a.data.stays.size(); ++i) {
      CHECK(a.data.stays[i].label == b.data.stays[i].label);
      any_value_differs |= !same_or_both_nan(a.data.stays[i].values, b.data.stays[i].values);
    }
    CHECK(any_value_differs);
  }
  SUBCASE("unreachable prevalence") {
    SynthConfig bad = sc;
    bad.prevalence = 1.0;
    CHECK_THROWS_AS(synth_generate(bad), DataError);
    bad.prevalence = 0.0;
    CHECK_THROWS_AS(synth_generate(bad), DataError);
  }
  SUBCASE("invalid configurations") {
    SynthConfig bad = sc;
    bad.spectral_radius = 1.0;
    CHECK_THROWS(synth_generate(bad));
    bad = sc;
    bad.missing_rate = 1.0;
    CHECK_THROWS(synth_generate(bad));
  }
}

TEST_CASE("synthetic prevalence on 5000 records") {
  SynthConfig sc;
  sc.records = 5000;
  sc.min_steps = 2;
  sc.max_steps = 6;
  sc.seed = 2;
  int pos = 0;
  for (const auto& s : synth_generate(sc).data.stays) pos += *s.label;
  const double share = pos / 5000.0;
  CHECK(share >= 0.084);
  CHECK(share <= 0.124);
}

TEST_CASE("checkpoint") {
  const SyntheticCohort c = test::small_cohort(3, 6, 4, 0.3);
  Checkpoint ck;
  ck.params = init_params(test::dims_for(c), 8);
  ck.normalizer = c.normalizer;
  ck.provenance["note"] = "unit";
  const fs::path dir = scratch("checkpoint");

  SUBCASE("save, load, save is byte-identical") {
    checkpoint_save(ck, dir / "a.json");
    const Checkpoint loaded = checkpoint_load(dir / "a.json");
    checkpoint_save(loaded, dir / "b.json");
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(loaded.params.dims == ck.params.dims);
    CHECK(loaded.params.settings.var_floor == ck.params.settings.var_floor);
    CHECK(loaded.normalizer->feature_mean == ck.normalizer->feature_mean);
    CHECK(loaded.provenance == ck.provenance);
  }
  SUBCASE("scores from loaded parameters are bitwise equal") {
    const Checkpoint loaded = checkpoint_parse(checkpoint_serialize(ck));
    const RiskScore a = score_at_time(c.records[0], 6, ck.params, 10, 3);
    const RiskScore b = score_at_time(c.records[0], 6, loaded.params, 10, 3);
    CHECK(a.samples == b.samples);
  }
  SUBCASE("tampered shape") {
    nlohmann::json j = nlohmann::json::parse(checkpoint_serialize(ck));
    j["tensors"]["emission.linear_w"]["rows"] = 99;
    try {
      checkpoint_parse(j.dump());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("emission.linear_w") != std::string::npos);
    }
  }
  SUBCASE("version mismatch") {
    nlohmann::json j = nlohmann::json::parse(checkpoint_serialize(ck));
    j["format_version"] = 2;
    CHECK_THROWS_AS(checkpoint_parse(j.dump()), DataError);
    CHECK_THROWS_AS(checkpoint_parse("{not json"), DataError);
  }
  fs::remove_all(dir);
}

}  // TEST_SUITE
