#include "regionvad/synth.hpp"

#include "regionvad/gmm.hpp"
#include "regionvad/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace regionvad {

ToyRuleSet ToyRuleSet::street_defaults() {
  ToyRuleSet r;
  r.regions = {"walkway", "bicycle lane", "car lane", "park lane"};
  r.objects = {"car", "person", "cyclist"};
  r.speeds = {"fast", "medium", "slow"};
  r.region_defaults = {0.25, 0.25, 0.25, 0.25};
  r.object_defaults = {0.33, 0.33, 0.34};
  r.speed_defaults = {0.3, 0.5, 0.2};
  r.region_object_hints = {{{"walkway", "person"}, 1.0},
                           {{"bicycle lane", "cyclist"}, 1.0},
                           {{"car lane", "car"}, 0.8},
                           {{"park lane", "person"}, 0.3}};
  // The listing files "cyclist fast: 0.1" among its constraints; a non-zero
  // value cannot forbid the pair, so it acts as a hint.
  r.object_speed_hints = {{{"car", "fast"}, 0.8},
                          {{"person", "slow"}, 0.7},
                          {{"cyclist", "medium"}, 0.9},
                          {{"cyclist", "fast"}, 0.1}};
  r.region_object_zero = {{"walkway", "car"},
                          {"bicycle lane", "car"},
                          {"car lane", "person"},
                          {"park lane", "cyclist"}};
  r.object_speed_zero = {{"car", "slow"}, {"person", "fast"}};
  return r;
}

namespace {

int index_of(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("toy rules: unknown value '" + name + "'");
  return static_cast<int>(it - names.begin());
}

Matrix conditional(const std::vector<std::string>& parents, const std::vector<std::string>& children,
                   const std::vector<double>& child_defaults,
                   const std::map<std::pair<std::string, std::string>, double>& hints,
                   const std::set<std::pair<std::string, std::string>>& zeros) {
  if (child_defaults.size() != children.size()) {
    throw std::invalid_argument("toy rules: default marginal has the wrong length");
  }
  const auto np = static_cast<Eigen::Index>(parents.size());
  const auto nc = static_cast<Eigen::Index>(children.size());
  Matrix p = Matrix::Zero(np, nc);
  // 0 = free, 1 = hinted, 2 = forbidden
  Eigen::MatrixXi state = Eigen::MatrixXi::Zero(np, nc);
  for (const auto& [pair, value] : hints) {
    if (value < 0.0 || value > 1.0) throw std::invalid_argument("toy rules: hint outside [0, 1]");
    const int a = index_of(parents, pair.first);
    const int b = index_of(children, pair.second);
    p(a, b) = value;
    state(a, b) = 1;
  }
  for (const auto& pair : zeros) {
    const int a = index_of(parents, pair.first);
    const int b = index_of(children, pair.second);
    p(a, b) = 0.0;
    state(a, b) = 2;
  }
  for (Eigen::Index a = 0; a < np; ++a) {
    double hinted = 0.0;
    double free_weight = 0.0;
    for (Eigen::Index b = 0; b < nc; ++b) {
      if (state(a, b) == 1) hinted += p(a, b);
      if (state(a, b) == 0) free_weight += child_defaults[static_cast<std::size_t>(b)];
    }
    const double remaining = std::max(0.0, 1.0 - hinted);
    if (free_weight > 0.0) {
      for (Eigen::Index b = 0; b < nc; ++b) {
        if (state(a, b) == 0) p(a, b) = remaining * child_defaults[static_cast<std::size_t>(b)] / free_weight;
      }
    }
    const double total = p.row(a).sum();
    if (!(total > 0.0)) {
      throw std::invalid_argument("toy rules: conditional row for '" + parents[static_cast<std::size_t>(a)] +
                                  "' has no mass");
    }
    p.row(a) /= total;
  }
  return p;
}

std::size_t draw(Rng& rng, const Eigen::Ref<const Vector>& probs) {
  return rng.categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
}

}  // namespace

Matrix ToyRuleSet::object_given_region() const {
  return conditional(regions, objects, object_defaults, region_object_hints, region_object_zero);
}

Matrix ToyRuleSet::speed_given_object() const {
  return conditional(objects, speeds, speed_defaults, object_speed_hints, object_speed_zero);
}

bool ToyRuleSet::conforms(int region, int object, int speed) const {
  return object_given_region()(region, object) > 0.0 && speed_given_object()(object, speed) > 0.0;
}

ToyData generate_toy(const ToyRuleSet& rules, int n_train, int n_test, std::uint64_t seed) {
  if (n_train < 0 || n_test < 0) throw std::invalid_argument("generate_toy: sample counts must be >= 0");
  if (rules.region_defaults.size() != rules.regions.size()) {
    throw std::invalid_argument("toy rules: region marginal has the wrong length");
  }
  const Matrix obj = rules.object_given_region();
  const Matrix spd = rules.speed_given_object();
  Vector region_p(static_cast<Eigen::Index>(rules.regions.size()));
  for (std::size_t i = 0; i < rules.regions.size(); ++i) region_p[static_cast<Eigen::Index>(i)] = rules.region_defaults[i];
  if (!(region_p.sum() > 0.0) || region_p.minCoeff() < 0.0) {
    throw std::invalid_argument("toy rules: region marginal cannot be normalised");
  }
  const Vector uniform_obj = Vector::Ones(obj.cols());
  const Vector uniform_spd = Vector::Ones(spd.cols());

  Rng rng(seed);
  auto from_rules = [&]() {
    ToySample s;
    s.region = static_cast<int>(draw(rng, region_p));
    s.object = static_cast<int>(draw(rng, obj.row(s.region).transpose()));
    s.speed = static_cast<int>(draw(rng, spd.row(s.object).transpose()));
    return s;
  };
  ToyData data;
  data.train.reserve(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) data.train.push_back(from_rules());
  data.test.reserve(2 * static_cast<std::size_t>(n_test));
  for (int i = 0; i < n_test; ++i) data.test.push_back(from_rules());
  for (int i = 0; i < n_test; ++i) {
    ToySample s;
    s.region = static_cast<int>(draw(rng, region_p));
    s.object = static_cast<int>(draw(rng, uniform_obj));
    s.speed = static_cast<int>(draw(rng, uniform_spd));
    s.anomalous = !(obj(s.region, s.object) > 0.0 && spd(s.object, s.speed) > 0.0);
    data.test.push_back(s);
  }
  return data;
}

Matrix toy_features(const ToyRuleSet& rules, std::span<const ToySample> samples) {
  const auto nr = static_cast<int>(rules.regions.size());
  const auto no = static_cast<int>(rules.objects.size());
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(samples.size()), rules.feature_dimension());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x(row, samples[i].region) = 1.0;
    x(row, nr + samples[i].object) = 1.0;
    x(row, nr + no + samples[i].speed) = 1.0;
  }
  return x;
}

ToyReport run_toy_experiment(const ToyRuleSet& rules, int n_train, int n_test, std::uint64_t seed,
                             int k_max) {
  const ToyData data = generate_toy(rules, n_train, n_test, derive_seed(seed, 0));
  ToyReport report;
  report.train_size = data.train.size();
  if (data.train.empty()) throw std::invalid_argument("run_toy_experiment: empty training set");
  const Matrix train = toy_features(rules, data.train);
  EmConfig em;
  em.seed = derive_seed(seed, 1);
  const GaussianMixture model = select_components_bic(train, k_max, CovarianceMode::full, em);
  report.selected_components = model.num_components();
  report.bic_table = model.metadata().bic_table;

  const Matrix test = toy_features(rules, data.test);
  const Vector log_pdf = model.log_pdf_rows(test);
  std::vector<double> scores(data.test.size());
  std::vector<int> labels(data.test.size());
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    scores[i] = -log_pdf[static_cast<Eigen::Index>(i)];
    labels[i] = data.test[i].anomalous ? 1 : 0;
    if (data.test[i].anomalous) {
      ++report.test_anomalous;
    } else {
      ++report.test_normal;
    }
  }
  report.auc = frame_auc(scores, labels);
  return report;
}

}  // namespace regionvad
