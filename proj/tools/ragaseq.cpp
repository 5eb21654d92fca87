// ragaseq: command-line driver. Every subcommand writes its artifacts plus a
// run_manifest.json into --out.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ragaseq/checkpoint.hpp"
#include "ragaseq/classify.hpp"
#include "ragaseq/corpus.hpp"
#include "ragaseq/eval.hpp"
#include "ragaseq/pipeline.hpp"
#include "ragaseq/pitch.hpp"
#include "ragaseq/rank.hpp"
#include "ragaseq/sampling.hpp"
#include "ragaseq/tokenize.hpp"
#include "ragaseq/train.hpp"
#include "ragaseq/wav.hpp"

#ifndef RAGASEQ_VERSION
#define RAGASEQ_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ragaseq;

namespace {

// ---------------------------------------------------------------------------
// Shared option groups

struct ModelOptions {
  int embed = 128;
  int hidden = 768;
  int attention = 128;
  int dense1 = 384;
  double dropout = 0.3;

  void add(CLI::App* app) {
    app->add_option("--embed-dim", embed, "Token embedding width")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--hidden", hidden, "LSTM hidden units")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--attention-dim", attention, "Attention projection width")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--dense1", dense1, "Units in the first dense layer")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--dropout", dropout, "Dropout rate after the first dense layer")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.99));
  }
};

struct TrainOptions {
  std::size_t batch = 40;
  double lr = 1e-4;
  int epochs = 50;
  int workers = 1;
  int staleness = 8;

  void add(CLI::App* app) {
    app->add_option("--batch-size", batch, "Subsequences per training step")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "Maximum training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--workers", workers, "Worker threads; more than one selects asynchronous training")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--staleness-bound", staleness, "Async: discard gradients this many updates old")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig t;
    t.batch_size = batch;
    t.learning_rate = lr;
    t.max_epochs = epochs;
    t.workers = workers;
    t.staleness_bound = staleness;
    t.seed = seed;
    return t;
  }
};

struct FrontEndOptions {
  int k = 5;
  int clamp = 2;
  bool rest = false;
  double fmin = 75.0;
  double fmax = 600.0;
  double voicing = 0.45;

  void add(CLI::App* app, bool with_pitch = true) {
    app->add_option("--k", k, "Quantization levels per half step")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--clamp-octaves", clamp, "Octaves either side of the tonic kept in the vocabulary")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_flag("--rest-token", rest, "Keep unvoiced frames as REST tokens");
    if (with_pitch) {
      app->add_option("--fmin", fmin, "Lowest pitch searched, Hz")->capture_default_str();
      app->add_option("--fmax", fmax, "Highest pitch searched, Hz")->capture_default_str();
      app->add_option("--voicing", voicing, "Autocorrelation strength needed to call a frame voiced")
          ->capture_default_str();
    }
  }

  FrontEndConfig config() const {
    FrontEndConfig c;
    c.quantizer.k = k;
    c.quantizer.clamp_octaves = clamp;
    c.quantizer.rest_token = rest;
    c.pitch.fmin_hz = fmin;
    c.pitch.fmax_hz = fmax;
    c.pitch.voicing_threshold = voicing;
    return c;
  }

  /// Front end matching a checkpoint's vocabulary.
  FrontEndConfig config_for(const ModelConfig& m) const {
    auto c = config();
    c.quantizer.k = m.k_levels;
    c.quantizer.clamp_octaves = m.clamp_octaves;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Run manifest

class RunRecord {
public:
  RunRecord(const CLI::App* sub, std::uint64_t seed, fs::path out) : sub_(sub), seed_(seed), out_(std::move(out)) {
    fs::create_directories(out_);
  }

  fs::path artifact(const std::string& name) {
    artifacts_.push_back(name);
    return out_ / name;
  }

  void write() const {
    json config = json::object();
    for (const CLI::Option* opt : sub_->get_options()) {
      if (opt->get_name() == "--help") continue;
      const std::string key = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& results = opt->results();
        config[key] = results.size() == 1 ? json(results.front()) : json(results);
      } else if (!opt->get_default_str().empty()) {
        config[key] = opt->get_default_str();
      } else if (opt->get_expected_max() == 0) {
        config[key] = false;
      } else {
        config[key] = nullptr;
      }
    }
    json m{{"subcommand", sub_->get_name()}, {"config", config}, {"seed", seed_}, {"artifacts", artifacts_},
           {"tool_version", RAGASEQ_VERSION}};
    std::ofstream(out_ / "run_manifest.json") << m.dump(2) << '\n';
  }

private:
  const CLI::App* sub_;
  std::uint64_t seed_;
  fs::path out_;
  std::vector<std::string> artifacts_;
};

// ---------------------------------------------------------------------------
// Helpers

/// Checkpoint labels live next to the weights: `<model>.classes`, one per line.
void write_labels(const fs::path& model, const Dataset& ds) {
  std::ofstream out(model.string() + ".classes");
  for (int c = 0; c < ds.num_classes(); ++c) out << ds.label_of(c) << '\n';
}

std::vector<std::string> read_labels(const fs::path& model) {
  std::ifstream in(model.string() + ".classes");
  if (!in) throw Error("missing class list " + model.string() + ".classes");
  std::vector<std::string> labels;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) labels.push_back(line);
  return labels;
}

/// Maps the dataset's raga names onto the class indices a model was trained with.
std::vector<TokenSequence> relabel(std::vector<TokenSequence> recs, const Dataset& ds,
                                   const std::vector<std::string>& labels) {
  for (auto& r : recs) {
    const auto& name = ds.find(r.source_id).raga;
    const auto it = std::find(labels.begin(), labels.end(), name);
    r.raga = it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
  }
  return recs;
}

ModelConfig model_config(const ModelOptions& mo, const FrontEndOptions& fe, int n_classes, std::size_t subseq_len) {
  ModelConfig m;
  m.embed_dim = mo.embed;
  m.lstm_hidden = mo.hidden;
  m.attention_dim = mo.attention;
  m.dense1_units = mo.dense1;
  m.dropout_rate = mo.dropout;
  m.n_classes = n_classes;
  m.k_levels = fe.k;
  m.clamp_octaves = fe.clamp;
  m.vocab_size = Vocabulary(fe.config().quantizer).size();
  m.subseq_len = static_cast<int>(subseq_len);
  m.validate();
  return m;
}

void write_subsequences(const fs::path& path, std::span<const TokenSequence> seqs) {
  std::ofstream out(path);
  out << "source_id,raga,offset,ids\n";
  for (const auto& s : seqs) {
    out << s.source_id << ',' << s.raga << ',' << s.offset << ',';
    for (std::size_t i = 0; i < s.ids.size(); ++i) out << (i ? " " : "") << s.ids[i];
    out << '\n';
  }
}

std::string verdict_label(const Verdict& v, const std::vector<std::string>& labels) {
  if (!v.label) return "ABSTAIN";
  const auto c = static_cast<std::size_t>(*v.label);
  return c < labels.size() ? labels[c] : std::to_string(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ragaseq: raga recognition by sequence classification and triplet-loss retrieval"};
  app.set_version_flag("--version", std::string(RAGASEQ_VERSION));
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  fs::path out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--seed", seed, "Seed for every random choice in this run")->capture_default_str();
  };

  // synth ------------------------------------------------------------------
  SynthConfig synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic raga corpus (tokens, optionally audio)");
  synth_cmd->add_option("--ragas", synth.n_ragas, "Number of synthetic ragas")->capture_default_str();
  synth_cmd->add_option("--per-raga", synth.recordings_per_raga, "Recordings per raga")->capture_default_str();
  synth_cmd->add_option("--seq-len", synth.seq_len, "Notes per recording")->capture_default_str();
  synth_cmd->add_option("--k", synth.k_levels, "Quantization levels per half step")->capture_default_str();
  synth_cmd->add_option("--tonic", synth.tonic_hz, "Tonic frequency, Hz")->capture_default_str();
  synth_cmd->add_option("--allied-contrast", synth.allied_contrast,
                        "Share one scale across ragas, varying transition weights by up to this fraction")
      ->capture_default_str();
  synth_cmd->add_flag("--render-audio", synth.render_audio, "Write WAV audio instead of token files");
  common(synth_cmd);

  // pitch ------------------------------------------------------------------
  fs::path wav_in;
  FrontEndOptions pitch_fe;
  double hop = 0.010, frame = 0.040;
  auto* pitch_cmd = app.add_subcommand("pitch", "Track the pitch of a mono WAV file into a t,f0 contour CSV");
  pitch_cmd->add_option("--in", wav_in, "Input WAV (mono 16-bit PCM)")->required()->check(CLI::ExistingFile);
  pitch_cmd->add_option("--hop", hop, "Hop between frames, seconds")->capture_default_str();
  pitch_cmd->add_option("--frame", frame, "Analysis window, seconds")->capture_default_str();
  pitch_cmd->add_option("--fmin", pitch_fe.fmin, "Lowest pitch searched, Hz")->capture_default_str();
  pitch_cmd->add_option("--fmax", pitch_fe.fmax, "Highest pitch searched, Hz")->capture_default_str();
  pitch_cmd->add_option("--voicing", pitch_fe.voicing, "Autocorrelation strength needed to call a frame voiced")
      ->capture_default_str();
  common(pitch_cmd);

  // tokenize ---------------------------------------------------------------
  fs::path contour_in;
  double tonic = 0.0;
  int tok_k = 5;
  auto* tok_cmd = app.add_subcommand("tokenize", "Quantize a contour CSV into a token file");
  tok_cmd->add_option("--in", contour_in, "Contour CSV (t,f0)")->required()->check(CLI::ExistingFile);
  tok_cmd->add_option("--tonic", tonic, "Tonic frequency, Hz")->required()->check(CLI::PositiveNumber);
  tok_cmd->add_option("--k", tok_k, "Quantization levels per half step")->capture_default_str()->check(CLI::PositiveNumber);
  common(tok_cmd);

  // sample -----------------------------------------------------------------
  fs::path manifest;
  std::size_t subseq_len = 5000;
  std::optional<std::size_t> num_samples;
  FrontEndOptions fe;
  auto* sample_cmd = app.add_subcommand("sample", "Draw random training subsequences from every recording");
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest, "Corpus manifest CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--subseq-len", subseq_len, "Subsequence length in tokens")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--num-samples", num_samples, "Subsequences per recording (default: ceil(2.2 L_max / L))");
  };
  add_data(sample_cmd);
  fe.add(sample_cmd);
  common(sample_cmd);

  // train ------------------------------------------------------------------
  ModelOptions mo;
  TrainOptions to;
  std::optional<double> loss_threshold;
  auto* train_cmd = app.add_subcommand("train", "Train the classifier on a manifest");
  add_data(train_cmd);
  fe.add(train_cmd);
  mo.add(train_cmd);
  to.add(train_cmd);
  train_cmd->add_option("--loss-threshold", loss_threshold, "Stop once an epoch's mean loss reaches this value");
  common(train_cmd);

  // infer ------------------------------------------------------------------
  std::vector<fs::path> models;
  std::optional<std::size_t> infer_len;
  auto* infer_cmd = app.add_subcommand("infer", "Classify whole recordings by voting over windows");
  infer_cmd->add_option("--model", models, "Classifier checkpoint; repeat for an ensemble")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--manifest", manifest, "Manifest of recordings to classify")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--subseq-len", infer_len, "Window length (default: the model's training length)");
  fe.add(infer_cmd);
  common(infer_cmd);

  // rank-train -------------------------------------------------------------
  fs::path model_in;
  RankerConfig rc;
  double rank_lr = 1e-4;
  auto* rank_cmd = app.add_subcommand("rank-train", "Adapt a classifier into a ranker and fine-tune it on triplets");
  rank_cmd->add_option("--model", model_in, "Trained classifier checkpoint")->required()->check(CLI::ExistingFile);
  add_data(rank_cmd);
  fe.add(rank_cmd);
  rank_cmd->add_option("--embedding-dim", rc.embedding_dim, "Embedding width")->capture_default_str();
  rank_cmd->add_option("--margin", rc.margin, "Triplet margin")->capture_default_str();
  rank_cmd->add_option("--steps", rc.steps, "Fine-tuning steps")->capture_default_str();
  rank_cmd->add_option("--triplets", rc.triplets_per_step, "Triplets per step")->capture_default_str();
  rank_cmd->add_option("--lr", rank_lr, "Adam learning rate")->capture_default_str();
  common(rank_cmd);

  // index ------------------------------------------------------------------
  auto* index_cmd = app.add_subcommand("index", "Embed subsequences of a corpus into a searchable index");
  index_cmd->add_option("--model", model_in, "Ranker checkpoint")->required()->check(CLI::ExistingFile);
  add_data(index_cmd);
  fe.add(index_cmd);
  common(index_cmd);

  // query ------------------------------------------------------------------
  fs::path index_in, tokens_in;
  std::size_t top_k = 10;
  std::size_t query_offset = 0;
  auto* query_cmd = app.add_subcommand("query", "Find the indexed subsequences nearest to a query");
  query_cmd->add_option("--model", model_in, "Ranker checkpoint")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--index", index_in, "Index file written by `index`")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--tokens", tokens_in, "Query token file (quantized values)")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--offset", query_offset, "Start of the query window in the token file")->capture_default_str();
  query_cmd->add_option("--k", top_k, "Results to return")->capture_default_str()->check(CLI::PositiveNumber);
  common(query_cmd);

  // eval -------------------------------------------------------------------
  std::string scheme = "loocv";
  int folds_k = 12;
  std::size_t holdout_per_class = 5;
  auto* eval_cmd = app.add_subcommand("eval", "Cross-validated training and voting evaluation");
  add_data(eval_cmd);
  fe.add(eval_cmd);
  mo.add(eval_cmd);
  to.add(eval_cmd);
  eval_cmd->add_option("--scheme", scheme, "Fold scheme")->capture_default_str()->check(CLI::IsMember({"loocv", "kfold", "holdout"}));
  eval_cmd->add_option("--folds", folds_k, "Folds for --scheme kfold")->capture_default_str();
  eval_cmd->add_option("--holdout-per-class", holdout_per_class, "Test recordings per raga for --scheme holdout")
      ->capture_default_str();
  common(eval_cmd);

  // length-study -----------------------------------------------------------
  std::vector<std::size_t> lengths{500, 1500, 3000};
  double study_threshold = 0.02;
  auto* study_cmd = app.add_subcommand("length-study", "Epochs to reach a loss threshold across subsequence lengths");
  study_cmd->add_option("--manifest", manifest, "Corpus manifest CSV")->required()->check(CLI::ExistingFile);
  study_cmd->add_option("--lengths", lengths, "Subsequence lengths to compare")->capture_default_str()->delimiter(',');
  study_cmd->add_option("--loss-threshold", study_threshold, "Target epoch loss")->capture_default_str();
  study_cmd->add_option("--holdout-per-class", holdout_per_class, "Test recordings per raga")->capture_default_str();
  fe.add(study_cmd);
  mo.add(study_cmd);
  to.add(study_cmd);
  common(study_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      RunRecord run(synth_cmd, seed, out_dir);
      synth.seed = seed;
      const auto ds = generate_synthetic_corpus(synth, out_dir);
      run.artifact("manifest.csv");
      run.artifact(synth.render_audio ? "audio/" : "tokens/");
      std::cout << "wrote " << ds.size() << " recordings of " << ds.num_classes() << " ragas to " << out_dir << '\n';
      run.write();
    } else if (*pitch_cmd) {
      RunRecord run(pitch_cmd, seed, out_dir);
      auto cfg = pitch_fe.config().pitch;
      cfg.hop_s = hop;
      cfg.frame_s = frame;
      const auto audio = read_wav(wav_in);
      const auto contour = track_pitch(audio.samples, audio.sample_rate, cfg);
      write_contour_csv(run.artifact(wav_in.stem().string() + ".csv"), contour);
      std::cout << contour.voiced_count() << " of " << contour.frames.size() << " frames voiced\n";
      run.write();
    } else if (*tok_cmd) {
      RunRecord run(tok_cmd, seed, out_dir);
      const auto values = quantize_contour(read_contour_csv(contour_in), tonic, tok_k);
      write_token_file(run.artifact(contour_in.stem().string() + ".txt"), values);
      std::cout << values.size() << " tokens\n";
      run.write();
    } else if (*sample_cmd) {
      RunRecord run(sample_cmd, seed, out_dir);
      const auto ds = load_manifest(manifest);
      const auto subs = sample_training_set(load_recordings(ds, fe.config()), subseq_len, num_samples, seed);
      write_subsequences(run.artifact("subsequences.csv"), subs);
      std::cout << subs.size() << " subsequences\n";
      run.write();
    } else if (*train_cmd) {
      RunRecord run(train_cmd, seed, out_dir);
      const auto ds = load_manifest(manifest);
      const auto samples = sample_training_set(load_recordings(ds, fe.config()), subseq_len, num_samples, seed);
      const auto model = model_config(mo, fe, ds.num_classes(), subseq_len);
      auto cfg = to.config(seed);
      cfg.loss_threshold = loss_threshold;
      cfg.stop_at_threshold = loss_threshold.has_value();
      const auto ckpt = run.artifact("model.ckpt");
      cfg.checkpoint_path = ckpt;
      const auto result = train_classifier(samples, cfg, model);
      if (result.report.epochs.empty()) save_checkpoint(ckpt, model, result.params);
      write_labels(ckpt, ds);
      run.artifact("model.ckpt.classes");
      result.report.write_csv(run.artifact("train_report.csv"));
      std::cout << samples.size() << " subsequences, " << result.report.epochs.size() << " epochs";
      if (!result.report.epochs.empty()) std::cout << ", final loss " << result.report.epochs.back().loss;
      std::cout << '\n';
      run.write();
    } else if (*infer_cmd) {
      RunRecord run(infer_cmd, seed, out_dir);
      std::vector<Checkpoint> members;
      for (const auto& m : models) members.push_back(load_checkpoint(m));
      const auto labels = read_labels(models.front());
      const auto& cfg = members.front().config;
      const std::size_t len = infer_len.value_or(static_cast<std::size_t>(cfg.subseq_len));
      const auto ds = load_manifest(manifest);
      std::ofstream out(run.artifact("verdicts.csv"));
      out << "id,predicted,majority_fraction\n";
      for (const auto& rec : load_recordings(ds, fe.config_for(cfg))) {
        const auto v = members.size() == 1 ? classify_recording(members.front().params, cfg, rec, len)
                                           : classify_recording(members, rec, len);
        std::ostringstream line;
        line << rec.source_id << ',' << verdict_label(v, labels) << ',' << std::setprecision(4) << v.majority_fraction;
        std::cout << line.str() << '\n';
        out << line.str() << '\n';
      }
      run.write();
    } else if (*rank_cmd) {
      RunRecord run(rank_cmd, seed, out_dir);
      const auto cls = load_checkpoint(model_in);
      const auto labels = read_labels(model_in);
      const auto ds = load_manifest(manifest);
      const auto recs = relabel(load_recordings(ds, fe.config_for(cls.config)), ds, labels);
      auto pool = sample_training_set(recs, subseq_len, num_samples, seed);
      std::erase_if(pool, [](const TokenSequence& s) { return s.raga < 0; });
      Rng rng(mix_seed(seed, 0x4a4bULL));
      auto ranker = adapt_classifier(cls.config, cls.params, rc, rng);
      TrainConfig tc;
      tc.learning_rate = rank_lr;
      tc.seed = seed;
      const auto tuned = finetune_ranker(std::move(ranker), SubsequencePool(std::move(pool)), rc, tc);
      const auto ckpt = run.artifact("ranker.ckpt");
      save_checkpoint(ckpt, tuned.ranker.config, tuned.ranker.params);
      std::ofstream(ckpt.string() + ".classes") << std::ifstream(model_in.string() + ".classes").rdbuf();
      run.artifact("ranker.ckpt.classes");
      std::ofstream losses(run.artifact("finetune_loss.csv"));
      losses << "step,loss\n";
      for (std::size_t i = 0; i < tuned.step_losses.size(); ++i) losses << i + 1 << ',' << tuned.step_losses[i] << '\n';
      if (!tuned.step_losses.empty())
        std::cout << "triplet loss " << tuned.step_losses.front() << " -> " << tuned.step_losses.back() << '\n';
      run.write();
    } else if (*index_cmd) {
      RunRecord run(index_cmd, seed, out_dir);
      const auto ck = load_checkpoint(model_in);
      if (!ck.config.embedding_head) throw Error(model_in.string() + " is not a ranker checkpoint");
      const Ranker ranker{ck.config, ck.params};
      const auto ds = load_manifest(manifest);
      auto recs = load_recordings(ds, fe.config_for(ck.config));
      std::vector<TokenSequence> items;
      if (num_samples) {
        items = sample_training_set(recs, subseq_len, num_samples, seed);
      } else {
        for (const auto& r : recs)
          for (auto& w : split_for_inference(r, subseq_len)) items.push_back(std::move(w));
      }
      const auto emb = embed_all(ranker, items);
      EmbeddingIndex index(static_cast<int>(emb.rows()));
      for (std::size_t i = 0; i < items.size(); ++i)
        index.add(std::span<const float>(emb.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(emb.rows())),
                  {items[i].source_id, items[i].raga, items[i].offset});
      index.save(run.artifact("index.bin"));
      run.artifact("index.bin.csv");
      std::cout << index.size() << " embeddings of width " << index.dim() << '\n';
      run.write();
    } else if (*query_cmd) {
      RunRecord run(query_cmd, seed, out_dir);
      const auto ck = load_checkpoint(model_in);
      if (!ck.config.embedding_head) throw Error(model_in.string() + " is not a ranker checkpoint");
      const Ranker ranker{ck.config, ck.params};
      const auto index = EmbeddingIndex::load(index_in);
      QuantizerConfig q;
      q.k = ck.config.k_levels;
      q.clamp_octaves = ck.config.clamp_octaves;
      const auto ids = values_to_ids(read_token_file(tokens_in), Vocabulary(q));
      if (query_offset >= ids.size()) throw Error("--offset is past the end of the token file");
      const auto len = static_cast<std::size_t>(ck.config.subseq_len);
      const auto end = std::min(ids.size(), query_offset + len);
      const auto window = left_pad(std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(query_offset),
                                                    ids.begin() + static_cast<std::ptrdiff_t>(end)),
                                   len);
      const auto e = embed(ranker, window);
      const auto result = query_top_k(index, std::span<const float>(e.data(), static_cast<std::size_t>(e.size())), top_k);
      std::ofstream out(run.artifact("results.csv"));
      out << "rank,row,source_id,raga,offset,distance\n";
      for (std::size_t i = 0; i < result.hits.size(); ++i) {
        const auto& h = result.hits[i];
        const auto& entry = index.entry(h.row);
        std::ostringstream line;
        line << i + 1 << ',' << h.row << ',' << entry.source_id << ',' << entry.raga << ',' << entry.offset << ','
             << std::setprecision(6) << h.distance;
        std::cout << line.str() << '\n';
        out << line.str() << '\n';
      }
      if (result.truncated) std::cerr << "note: index holds fewer than " << top_k << " entries\n";
      run.write();
    } else if (*eval_cmd) {
      RunRecord run(eval_cmd, seed, out_dir);
      const auto ds = load_manifest(manifest);
      const auto recs = load_recordings(ds, fe.config());
      std::vector<Fold> folds;
      if (scheme == "loocv")
        folds = loocv_splits(ds);
      else if (scheme == "kfold")
        folds = stratified_kfold(ds, folds_k, seed);
      else
        folds.push_back(holdout_split(ds, holdout_per_class, seed));

      ExperimentConfig cfg;
      cfg.model = model_config(mo, fe, ds.num_classes(), subseq_len);
      cfg.train = to.config(seed);
      cfg.subseq_len = subseq_len;
      cfg.samples_per_recording = num_samples;
      ConfusionMatrix rec_cm(ds.num_classes()), win_cm(ds.num_classes());
      std::vector<std::string> labels;
      for (int c = 0; c < ds.num_classes(); ++c) labels.push_back(ds.label_of(c));
      std::ofstream results(run.artifact("results.csv"));
      results << "fold,id,true,predicted,majority_fraction,windows\n";
      json per_fold = json::array();
      for (std::size_t f = 0; f < folds.size(); ++f) {
        validate_fold(folds[f], ds);
        cfg.seed = mix_seed(seed, f);
        const auto r = run_fold(recs, folds[f], cfg);
        rec_cm.merge(r.recording_cm);
        win_cm.merge(r.window_cm);
        for (const auto& o : r.recordings)
          results << folds[f].name << ',' << o.id << ',' << labels[static_cast<std::size_t>(o.truth)] << ','
                  << verdict_label(o.verdict, labels) << ',' << o.verdict.majority_fraction << ',' << o.verdict.windows
                  << '\n';
        per_fold.push_back({{"fold", folds[f].name},
                            {"recording_accuracy", r.recording_cm.accuracy()},
                            {"subsequence_accuracy", r.window_cm.accuracy()}});
        std::cout << folds[f].name << ": recording accuracy " << r.recording_cm.accuracy() << ", subsequence accuracy "
                  << r.window_cm.accuracy() << std::endl;
      }
      rec_cm.write_csv(run.artifact("confusion_recording.csv"), labels);
      win_cm.write_csv(run.artifact("confusion_subsequence.csv"), labels);
      const json summary{{"scheme", scheme},
                         {"folds", per_fold},
                         {"recording_accuracy", rec_cm.accuracy()},
                         {"subsequence_accuracy", win_cm.accuracy()}};
      std::ofstream(run.artifact("summary.json")) << summary.dump(2) << '\n';
      std::cout << "overall: recording accuracy " << rec_cm.accuracy() << ", subsequence accuracy " << win_cm.accuracy()
                << '\n';
      run.write();
    } else if (*study_cmd) {
      RunRecord run(study_cmd, seed, out_dir);
      const auto ds = load_manifest(manifest);
      const auto recs = load_recordings(ds, fe.config());
      const auto fold = holdout_split(ds, holdout_per_class, seed);
      ExperimentConfig cfg;
      cfg.model = model_config(mo, fe, ds.num_classes(), lengths.front());
      cfg.train = to.config(seed);
      cfg.seed = seed;
      const auto rows = run_length_study(recs, fold, lengths, cfg, study_threshold);
      write_length_study_csv(run.artifact("length_study.csv"), rows);
      for (const auto& r : rows)
        std::cout << "L=" << r.subseq_len << " epochs_to_threshold="
                  << (r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : "NA")
                  << " holdout_accuracy=" << r.holdout_accuracy << '\n';
      run.write();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
