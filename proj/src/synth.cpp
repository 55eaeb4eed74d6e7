#include "urbanfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "urbanfuse/error.hpp"
#include "urbanfuse/rng.hpp"

namespace urbanfuse {

namespace {

constexpr double kLatMin = 52.33, kLatMax = 52.41;
constexpr double kLonMin = 4.83, kLonMax = 4.96;
constexpr double kMetresPerDegLat = 111320.0;
constexpr double kClassWordShare = 0.7;
constexpr double kVisualMeanScale = 0.3;
constexpr double kReportSpreadM = 250.0;
constexpr double kObjectSpreadM = 200.0;
constexpr double kHourSpread = 0.8;
constexpr double kPeakWeekdayShare = 0.8;

const char* const kMainNames[] = {"waste", "roads", "greenery", "lighting",
                                  "nuisance", "water", "traffic", "public_space"};
const char* const kObjectTypes[] = {"bench", "litter_bin", "lamp_post", "tree", "bike_rack", "container",
                                    "playground", "bridge", "parking", "bus_stop", "toilet", "fountain",
                                    "statue", "charging_point", "sign", "hydrant"};

std::string indexed(const char* const* names, std::size_t count, std::size_t i) {
  if (i < count) return names[i];
  return std::string(names[i % count]) + "_" + std::to_string(i / count);
}

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {}

  std::string next() {
    static const char consonants[] = "bdfgklmnprstvz";
    static const char vowels[] = "aeiou";
    for (;;) {
      const std::size_t syllables = 2 + rng_.below(2);
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += consonants[rng_.below(sizeof consonants - 1)];
        w += vowels[rng_.below(sizeof vowels - 1)];
      }
      if (rng_.bernoulli(0.3)) w += consonants[rng_.below(sizeof consonants - 1)];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct Layout {
  std::vector<std::string> background;
  std::vector<std::vector<std::string>> class_words;
  std::vector<std::array<std::string, 2>> concepts;
  std::vector<std::pair<double, double>> centres;
  std::vector<int> peak_hour;
  std::vector<int> peak_weekday;
  Matrix visual_means;
};

std::pair<double, double> offset(double lat, double lon, double dy_m, double dx_m) {
  const double dlat = dy_m / kMetresPerDegLat;
  const double dlon = dx_m / (kMetresPerDegLat * std::cos(lat * std::numbers::pi / 180.0));
  return {lat + dlat, lon + dlon};
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

LocalDateTime random_moment(Rng& rng, int year, int weekday, int hour) {
  const std::int64_t jan1 = days_from_civil(year, 1, 1);
  const int jan1_weekday = static_cast<int>(((jan1 % 7) + 7 + 3) % 7);  // 1970-01-01 was a Thursday
  const int first = (weekday - jan1_weekday + 7) % 7;
  const std::int64_t day = jan1 + first + 7 * static_cast<std::int64_t>(rng.below(52));
  LocalDateTime t = LocalDateTime::from_hour_key(day * 24 + hour);
  t.minute = static_cast<int>(rng.below(60));
  t.second = static_cast<int>(rng.below(60));
  return t;
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.num_main_classes < 1 || c.num_issue_classes < c.num_main_classes) {
    throw Error(ErrorCode::invalid_input, "need at least one main class and num_issue_classes >= num_main_classes");
  }
  if (c.num_reports < c.num_issue_classes) {
    throw Error(ErrorCode::invalid_input, "num_reports (" + std::to_string(c.num_reports) +
                                              ") < num_issue_classes (" + std::to_string(c.num_issue_classes) + ")");
  }
  for (double w : c.weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorCode::invalid_input, "modality weights must be in [0, 1]");
  }
  if (!(c.label_noise >= 0.0 && c.label_noise < 1.0)) throw Error(ErrorCode::invalid_input, "label_noise must be in [0, 1)");
  if (!(c.image_rate >= 0.0 && c.image_rate <= 1.0)) throw Error(ErrorCode::invalid_input, "image_rate must be in [0, 1]");
  if (!(c.zipf >= 0.0)) throw Error(ErrorCode::invalid_input, "zipf must be >= 0");
  if (c.vocabulary_size < 1 || c.words_per_class < 1 || c.geo_object_types < 1) {
    throw Error(ErrorCode::invalid_input, "vocabulary_size, words_per_class and geo_object_types must be >= 1");
  }
}

std::vector<double> class_priors(const SynthConfig& config) {
  std::vector<double> p(config.num_issue_classes);
  double total = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) total += (p[c] = std::pow(static_cast<double>(c + 1), -config.zipf));
  for (double& v : p) v /= total;
  return p;
}

SynthData generate(const SynthConfig& config) {
  validate(config);
  const std::size_t k = config.num_issue_classes;
  const std::size_t n = config.num_reports;

  // Taxonomy: issue c belongs to main c mod M.
  std::vector<std::string> mains;
  for (std::size_t m = 0; m < config.num_main_classes; ++m) mains.push_back(indexed(kMainNames, 8, m));
  std::vector<std::pair<std::string, std::string>> issues;
  std::vector<std::size_t> per_main(config.num_main_classes, 0);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t m = c % config.num_main_classes;
    issues.emplace_back(mains[m] + "_" + std::to_string(++per_main[m]), mains[m]);
  }
  SynthData out;
  out.dataset.taxonomy = LabelTaxonomy(mains, issues);

  // Class profiles.
  Layout L;
  {
    Rng rng(derive_seed(config.seed, "layout"));
    WordMaker words(rng);
    for (std::size_t i = 0; i < config.vocabulary_size; ++i) L.background.push_back(words.next());
    L.class_words.resize(k);
    for (auto& cw : L.class_words) {
      for (std::size_t i = 0; i < config.words_per_class; ++i) cw.push_back(words.next());
    }
    for (std::size_t c = 0; c < k; ++c) L.concepts.push_back({words.next(), words.next()});
    for (std::size_t c = 0; c < k; ++c) {
      L.centres.emplace_back(rng.uniform(kLatMin + 0.01, kLatMax - 0.01), rng.uniform(kLonMin + 0.015, kLonMax - 0.015));
    }
    std::vector<int> hours(24), days(7);
    for (int h = 0; h < 24; ++h) hours[static_cast<std::size_t>(h)] = h;
    for (int d = 0; d < 7; ++d) days[static_cast<std::size_t>(d)] = d;
    rng.shuffle(std::span<int>(hours));
    rng.shuffle(std::span<int>(days));
    for (std::size_t c = 0; c < k; ++c) {
      L.peak_hour.push_back(hours[c % 24]);
      L.peak_weekday.push_back(days[c % 7]);
    }
    L.visual_means = Matrix(k, kVisualDims);
    for (double& v : std::span<double>(L.visual_means.data(), k * kVisualDims)) v = kVisualMeanScale * rng.normal();
  }

  // Labels: exact allocation of the priors, shuffled over report positions.
  std::vector<std::size_t> labels;
  {
    const auto priors = class_priors(config);
    std::vector<std::size_t> count(k);
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double exact = priors[c] * static_cast<double>(n);
      count[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += count[c];
      remainder.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++count[remainder[i % k].second];
    for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), count[c], c);
    Rng rng(derive_seed(config.seed, "labels"));
    rng.shuffle(std::span<std::size_t>(labels));
  }

  const std::uint64_t report_root = derive_seed(config.seed, "report");
  const std::size_t id_width = std::max<std::size_t>(6, std::to_string(n).size());
  out.dataset.reports.resize(n);
  out.cues.resize(n);
  out.true_issue = labels;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(report_root, i));
    const std::size_t y = labels[i];
    auto& cue = out.cues[i];
    for (std::size_t m = 0; m < kModalities; ++m) {
      cue[m] = rng.bernoulli(config.weights[m]) ? y : static_cast<std::size_t>(rng.below(k));
    }
    Report& r = out.dataset.reports[i];
    std::string id = std::to_string(i + 1);
    r.id = "r" + std::string(id_width - id.size(), '0') + id;

    const std::size_t length = 6 + rng.below(9);
    for (std::size_t t = 0; t < length; ++t) {
      if (t) r.text += ' ';
      const auto& pool = rng.bernoulli(kClassWordShare) ? L.class_words[cue[kText]] : L.background;
      r.text += pool[rng.below(pool.size())];
    }

    const auto [clat, clon] = L.centres[cue[kGeo]];
    std::tie(r.lat, r.lon) = offset(clat, clon, kReportSpreadM * rng.normal(), kReportSpreadM * rng.normal());
    r.lat = round_to(r.lat, 1e6);
    r.lon = round_to(r.lon, 1e6);

    const std::size_t tc = cue[kTime];
    const int hour = ((L.peak_hour[tc] + static_cast<int>(std::lround(kHourSpread * rng.normal()))) % 24 + 24) % 24;
    const int weekday = rng.bernoulli(kPeakWeekdayShare) ? L.peak_weekday[tc] : static_cast<int>(rng.below(7));
    r.timestamp = random_moment(rng, config.year, weekday, hour);

    if (rng.bernoulli(config.image_rate)) {
      r.image_ref = r.id;
      VisualFeatureEntry e;
      e.report_id = r.id;
      e.vector.resize(kVisualDims);
      const auto mean = L.visual_means.row(cue[kVisual]);
      for (std::size_t d = 0; d < kVisualDims; ++d) e.vector[d] = round_to(mean[d] + rng.normal(), 1e4);
      const double p1 = round_to(rng.uniform(0.35, 0.9), 1e4);
      const double p2 = round_to(rng.uniform(0.02, std::min(p1, 1.0 - p1)), 1e4);
      e.concepts = {{L.concepts[cue[kVisual]][0], p1}, {L.concepts[cue[kVisual]][1], p2}};
      out.visual.emplace(r.id, std::move(e));
    }

    std::size_t observed = y;
    if (config.label_noise > 0.0 && k > 1 && rng.bernoulli(config.label_noise)) {
      observed = (y + 1 + static_cast<std::size_t>(rng.below(k - 1))) % k;
    }
    r.issue_class = out.dataset.taxonomy.issue_classes()[observed];
    r.main_class = mains[static_cast<std::size_t>(out.dataset.taxonomy.main_of_issue(static_cast<int>(observed)))];
  }

  {
    Rng rng(derive_seed(config.seed, "objects"));
    const std::size_t types = config.geo_object_types;
    for (std::size_t c = 0; c < k; ++c) {
      const auto [clat, clon] = L.centres[c];
      for (std::size_t j = 0; j < config.objects_per_class; ++j) {
        auto [lat, lon] = offset(clat, clon, kObjectSpreadM * rng.normal(), kObjectSpreadM * rng.normal());
        out.geo_objects.push_back({indexed(kObjectTypes, 16, c % types), round_to(lat, 1e6), round_to(lon, 1e6)});
      }
    }
    for (std::size_t t = 0; t < types; ++t) {
      for (std::size_t j = 0; j < config.background_objects_per_type; ++j) {
        out.geo_objects.push_back({indexed(kObjectTypes, 16, t), round_to(rng.uniform(kLatMin, kLatMax), 1e6),
                                   round_to(rng.uniform(kLonMin, kLonMax), 1e6)});
      }
    }
  }

  {
    Rng rng(derive_seed(config.seed, "history"));
    for (std::size_t c = 0; c < k; ++c) {
      const auto [clat, clon] = L.centres[c];
      for (std::size_t j = 0; j < config.history_per_class; ++j) {
        auto [lat, lon] = offset(clat, clon, kReportSpreadM * rng.normal(), kReportSpreadM * rng.normal());
        const auto when = random_moment(rng, config.year - 1, static_cast<int>(rng.below(7)),
                                        static_cast<int>(rng.below(24)));
        out.history.push_back({out.dataset.taxonomy.issue_classes()[c], round_to(lat, 1e6), round_to(lon, 1e6), when});
      }
    }
  }

  {
    Rng rng(derive_seed(config.seed, "weather"));
    out.weather.column_names = {"temperature_c", "precipitation_mm", "wind_speed_ms",
                                "humidity_pct", "pressure_hpa", "sunshine_min"};
    const std::int64_t first = days_from_civil(config.year, 1, 1) * 24;
    const std::int64_t last = days_from_civil(config.year + 1, 1, 1) * 24;
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::int64_t h = first; h < last; ++h) {
      const double doy = static_cast<double>(h - first) / 24.0;
      const double hod = static_cast<double>((h - first) % 24);
      const double season = std::sin(two_pi * (doy - 110.0) / 365.0);
      const double daily = std::sin(two_pi * (hod - 9.0) / 24.0);
      const double temp = 10.0 + 8.0 * season + 4.0 * daily + 1.5 * rng.normal();
      const double rain = std::max(0.0, 0.6 * rng.normal() - 0.2 * season);
      const double wind = std::max(0.0, 5.0 - 1.5 * season + 2.0 * rng.normal());
      const double humidity = std::clamp(80.0 - 10.0 * season - 8.0 * daily + 5.0 * rng.normal(), 20.0, 100.0);
      const double pressure = 1013.0 + 8.0 * rng.normal();
      const double sun = std::clamp(30.0 * daily + 15.0 * season + 10.0 * rng.normal(), 0.0, 60.0);
      out.weather.rows.push_back({LocalDateTime::from_hour_key(h),
                                  {round_to(temp, 10), round_to(rain, 10), round_to(wind, 10),
                                   round_to(humidity, 10), round_to(pressure, 10), round_to(sun, 10)}});
    }
  }
  return out;
}

void save_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_reports(data.dataset, dir / "reports.jsonl");
  save_geo_objects(data.geo_objects, dir / "geo_objects.csv");
  save_historical_events(data.history, dir / "history.csv");
  save_weather(data.weather, dir / "weather.csv");
  save_visual_features(data.visual, dir / "visual.jsonl");
}

}  // namespace urbanfuse
