#include "ragaseq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include "ragaseq/wav.hpp"

namespace ragaseq {

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<ManifestEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const std::string where = "entry " + std::to_string(i) + " (id '" + e.id + "')";
    if (e.id.empty()) throw Error("dataset: " + where + " has an empty id");
    if (!seen.insert(e.id).second) throw Error("dataset: duplicate id '" + e.id + "'");
    if (!(e.tonic_hz > 0.0) || !std::isfinite(e.tonic_hz))
      throw Error("dataset: " + where + " needs a positive tonic_hz");
    if (e.audio_path.has_value() == e.token_path.has_value())
      throw Error("dataset: " + where + " must have exactly one of audio_path and token_path");
    if (e.raga.empty()) throw Error("dataset: " + where + " has an empty raga label");
    class_map_.emplace(e.raga, 0);
  }
  int next = 0;
  for (auto& [label, index] : class_map_) {
    index = next++;
    labels_.push_back(label);
  }
}

int Dataset::class_of(const ManifestEntry& entry) const { return class_of(entry.raga); }

int Dataset::class_of(const std::string& raga) const {
  const auto it = class_map_.find(raga);
  if (it == class_map_.end()) throw Error("dataset: unknown raga '" + raga + "'");
  return it->second;
}

const std::string& Dataset::label_of(int class_index) const {
  if (class_index < 0 || class_index >= num_classes())
    throw Error("dataset: class index " + std::to_string(class_index) + " out of range");
  return labels_[static_cast<std::size_t>(class_index)];
}

const ManifestEntry& Dataset::find(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return e;
  throw Error("dataset: no entry with id '" + id + "'");
}

std::vector<std::vector<std::string>> Dataset::ids_by_class() const {
  std::vector<std::vector<std::string>> out(class_map_.size());
  for (const auto& e : entries_) out[static_cast<std::size_t>(class_of(e))].push_back(e.id);
  for (auto& ids : out) std::sort(ids.begin(), ids.end());
  return out;
}

bool Dataset::is_balanced() const {
  const auto groups = ids_by_class();
  return std::all_of(groups.begin(), groups.end(),
                     [&](const auto& g) { return g.size() == groups.front().size(); });
}

Dataset Dataset::subset(std::span<const std::string> ids) const {
  Dataset out;
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  for (const auto& e : entries_)
    if (wanted.count(e.id)) out.entries_.push_back(e);
  if (out.entries_.size() != wanted.size()) throw Error("dataset: subset names unknown ids");
  out.class_map_ = class_map_;
  out.labels_ = labels_;
  return out;
}

// ---------------------------------------------------------------------------
// Manifest CSV

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string stored_path(const std::optional<fs::path>& p, const fs::path& base) {
  if (!p) return {};
  const auto rel = p->lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p->generic_string();
}

}  // namespace

Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("manifest: cannot open " + path.string());
  const fs::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw Error("manifest: " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,audio_path,token_path,tonic_hz,raga")
    throw Error("manifest: expected header `id,audio_path,token_path,tonic_hz,raga` in " + path.string());

  std::vector<ManifestEntry> entries;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    const std::string where = path.filename().string() + " row " + std::to_string(row);
    if (f.size() != 5) throw Error("manifest: " + where + " has " + std::to_string(f.size()) + " fields, expected 5");
    ManifestEntry e;
    e.id = f[0];
    if (!f[1].empty()) e.audio_path = fs::path(f[1]).is_absolute() ? fs::path(f[1]) : base / f[1];
    if (!f[2].empty()) e.token_path = fs::path(f[2]).is_absolute() ? fs::path(f[2]) : base / f[2];
    try {
      std::size_t used = 0;
      e.tonic_hz = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error("manifest: " + where + " (id '" + e.id + "') has an unparsable tonic_hz '" + f[3] + "'");
    }
    if (!(e.tonic_hz > 0.0))
      throw Error("manifest: " + where + " (id '" + e.id + "') has non-positive tonic_hz " + f[3]);
    e.raga = f[4];
    if (e.audio_path.has_value() == e.token_path.has_value())
      throw Error("manifest: " + where + " must set exactly one of audio_path and token_path");
    entries.push_back(std::move(e));
  }
  return Dataset(std::move(entries));
}

void save_manifest(const fs::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error("manifest: cannot open " + path.string() + " for writing");
  const fs::path base = path.parent_path();
  out << "id,audio_path,token_path,tonic_hz,raga\n" << std::setprecision(10);
  for (const auto& e : dataset.entries())
    out << csv_field(e.id) << ',' << csv_field(stored_path(e.audio_path, base)) << ','
        << csv_field(stored_path(e.token_path, base)) << ',' << e.tonic_hz << ',' << csv_field(e.raga) << '\n';
}

std::vector<int> read_token_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("tokens: cannot open " + path.string());
  std::vector<int> values;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    try {
      values.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw Error("tokens: bad value on line " + std::to_string(row) + " of " + path.string());
    }
  }
  return values;
}

void write_token_file(const fs::path& path, std::span<const int> values) {
  std::ofstream out(path);
  if (!out) throw Error("tokens: cannot open " + path.string() + " for writing");
  for (int v : values) out << v << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic ragas

void SynthConfig::validate(std::size_t min_seq_len) const {
  if (n_ragas < 2) throw Error("synth: n_ragas must be >= 2");
  if (recordings_per_raga < 1) throw Error("synth: recordings_per_raga must be >= 1");
  if (seq_len < std::max<std::size_t>(min_seq_len, 1))
    throw Error("synth: seq_len " + std::to_string(seq_len) + " is shorter than the subsequence length " +
                std::to_string(min_seq_len));
  if (k_levels < 1) throw Error("synth: k_levels must be >= 1");
  if (!(tonic_hz > 0.0)) throw Error("synth: tonic_hz must be positive");
  if (!(note_s > 0.0)) throw Error("synth: note_s must be positive");
  if (sample_rate < 8000) throw Error("synth: sample_rate must be >= 8000");
  if (!(allied_contrast >= 0.0 && allied_contrast < 1.0)) throw Error("synth: allied_contrast must be in [0, 1)");
  // Ten non-fixed pitch classes, five chosen per raga.
  if (n_ragas > 252) throw Error("synth: at most 252 distinct scales are available");
}

void validate_grammar(const RagaGrammar& g) {
  if (g.notes.empty()) throw Error("grammar " + g.name + ": no notes");
  if (g.transitions.size() != g.notes.size()) throw Error("grammar " + g.name + ": transition table is not square");
  for (std::size_t i = 0; i < g.transitions.size(); ++i) {
    const auto& row = g.transitions[i];
    if (row.size() != g.notes.size()) throw Error("grammar " + g.name + ": transition table is not square");
    double total = 0.0;
    for (double w : row) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error("grammar " + g.name + ": negative or non-finite weight");
      total += w;
    }
    if (total <= 0.0)
      throw Error("grammar " + g.name + ": note " + std::to_string(g.notes[i]) + " is a dead end (no allowed transition)");
  }
}

std::vector<RagaGrammar> make_raga_grammars(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int kLowest = -5, kHighest = 19;  // lower fifth to the upper sixth, in semitones
  const std::vector<int> optional_classes{1, 2, 3, 4, 5, 6, 8, 9, 10, 11};

  std::set<std::vector<int>> used_scales;
  std::vector<RagaGrammar> out;
  while (static_cast<int>(out.size()) < cfg.n_ragas) {
    std::vector<int> pool = optional_classes;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<int> scale{0, 7};
    scale.insert(scale.end(), pool.begin(), pool.begin() + 5);
    std::sort(scale.begin(), scale.end());
    if (!used_scales.insert(scale).second) continue;

    RagaGrammar g;
    char name[32];
    std::snprintf(name, sizeof(name), "raga_%02zu", out.size());
    g.name = name;
    std::vector<int> semitones;
    for (int s = kLowest; s <= kHighest; ++s)
      if (std::binary_search(scale.begin(), scale.end(), ((s % 12) + 12) % 12)) semitones.push_back(s);
    for (int s : semitones) g.notes.push_back(s * cfg.k_levels);

    // One pitch class is approached only from above (a crooked ascent).
    const int skipped_on_ascent = scale[1 + static_cast<std::size_t>(unit(rng) * (scale.size() - 1))];
    const auto n = g.notes.size();
    g.transitions.assign(n, std::vector<double>(n, 0.0));
    const double step_weight[4] = {0.5, 3.0, 1.0, 0.4};
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = -3; d <= 3; ++d) {
        const auto j = static_cast<long>(i) + d;
        if (j < 0 || j >= static_cast<long>(n)) continue;
        const int ad = std::abs(d);
        double w = step_weight[ad] * (0.5 + unit(rng));
        if (ad >= 2 && unit(rng) < 0.35) w = 0.0;
        if (d > 0 && ((semitones[static_cast<std::size_t>(j)] % 12) + 12) % 12 == skipped_on_ascent) w = 0.0;
        g.transitions[i][static_cast<std::size_t>(j)] = w;
      }
      double total = 0.0;
      for (double w : g.transitions[i]) total += w;
      if (total == 0.0) g.transitions[i][i > 0 ? i - 1 : i + 1] = 1.0;
    }
    validate_grammar(g);
    out.push_back(std::move(g));
    if (cfg.allied_contrast > 0.0) break;
  }
  if (cfg.allied_contrast > 0.0) {
    const RagaGrammar base = out.front();
    out.clear();
    for (int r = 0; r < cfg.n_ragas; ++r) {
      RagaGrammar g = base;
      char name[32];
      std::snprintf(name, sizeof(name), "raga_%02d", r);
      g.name = name;
      for (auto& row : g.transitions)
        for (double& w : row) w *= 1.0 + cfg.allied_contrast * (2.0 * unit(rng) - 1.0);
      validate_grammar(g);
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<int> generate_token_values(const RagaGrammar& g, std::size_t length, Rng& rng) {
  validate_grammar(g);
  std::vector<std::discrete_distribution<std::size_t>> rows;
  rows.reserve(g.transitions.size());
  for (const auto& row : g.transitions) rows.emplace_back(row.begin(), row.end());
  // Start on the tonic when the grammar has it.
  const auto tonic = std::find(g.notes.begin(), g.notes.end(), 0);
  std::size_t state = tonic != g.notes.end() ? static_cast<std::size_t>(tonic - g.notes.begin()) : 0;
  std::vector<int> values;
  values.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    values.push_back(g.notes[state]);
    state = rows[state](rng);
  }
  return values;
}

std::vector<float> render_token_values(std::span<const int> values, double tonic_hz, int k_levels, double note_s,
                                       int sample_rate) {
  if (k_levels < 1 || !(tonic_hz > 0.0) || !(note_s > 0.0) || sample_rate <= 0)
    throw Error("render: invalid rendering parameters");
  const auto per_note = static_cast<std::size_t>(std::lround(note_s * sample_rate));
  std::vector<float> out;
  out.reserve(values.size() * per_note);
  double phase = 0.0;
  for (int v : values) {
    const double f = tonic_hz * std::exp2(static_cast<double>(v) / (12.0 * k_levels));
    const double step = 2.0 * std::numbers::pi * f / sample_rate;
    for (std::size_t i = 0; i < per_note; ++i) {
      out.push_back(static_cast<float>(0.5 * std::sin(phase)));
      phase = std::fmod(phase + step, 2.0 * std::numbers::pi);
    }
  }
  return out;
}

Dataset generate_synthetic_corpus(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto grammars = make_raga_grammars(cfg);
  fs::create_directories(out_dir / "tokens");
  if (cfg.render_audio) fs::create_directories(out_dir / "audio");

  std::vector<ManifestEntry> entries;
  for (std::size_t r = 0; r < grammars.size(); ++r) {
    for (int i = 0; i < cfg.recordings_per_raga; ++i) {
      // Each recording gets its own stream so regenerating one never shifts the others.
      Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (r * 1000 + static_cast<std::size_t>(i) + 1)));
      char id[64];
      std::snprintf(id, sizeof(id), "%s_rec%02d", grammars[r].name.c_str(), i);
      const auto values = generate_token_values(grammars[r], cfg.seq_len, rng);
      const fs::path token_file = out_dir / "tokens" / (std::string(id) + ".txt");
      write_token_file(token_file, values);

      ManifestEntry e;
      e.id = id;
      e.tonic_hz = cfg.tonic_hz;
      e.raga = grammars[r].name;
      if (cfg.render_audio) {
        const fs::path wav_file = out_dir / "audio" / (std::string(id) + ".wav");
        write_wav(wav_file, Audio{cfg.sample_rate, render_token_values(values, cfg.tonic_hz, cfg.k_levels,
                                                                       cfg.note_s, cfg.sample_rate)});
        e.audio_path = wav_file;
      } else {
        e.token_path = token_file;
      }
      entries.push_back(std::move(e));
    }
  }
  Dataset dataset(std::move(entries));
  save_manifest(out_dir / "manifest.csv", dataset);
  return dataset;
}

}  // namespace ragaseq
