#include "ragaseq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <unordered_set>

#include "ragaseq/pipeline.hpp"
#include "ragaseq/sampling.hpp"

namespace ragaseq {

void validate_fold(const Fold& fold, const Dataset& dataset) {
  if (fold.train_ids.empty() || fold.test_ids.empty()) throw Error("fold '" + fold.name + "' has an empty side");
  std::unordered_set<std::string> train(fold.train_ids.begin(), fold.train_ids.end());
  for (const auto& id : fold.test_ids)
    if (train.count(id)) throw Error("fold '" + fold.name + "': '" + id + "' is in both train and test");
  for (const auto* ids : {&fold.train_ids, &fold.test_ids})
    for (const auto& id : *ids)
      (void)dataset.find(id);  // throws on unknown ids
}

std::vector<Fold> loocv_splits(const Dataset& dataset) {
  if (!dataset.is_balanced()) throw Error("loocv: dataset must have the same number of recordings per raga");
  const auto by_class = dataset.ids_by_class();
  const std::size_t per_class = by_class.front().size();
  if (per_class < 2) throw Error("loocv: need at least 2 recordings per raga");
  std::vector<Fold> folds(per_class);
  for (std::size_t f = 0; f < per_class; ++f) {
    folds[f].name = "loocv_" + std::to_string(f);
    for (const auto& ids : by_class)
      for (std::size_t i = 0; i < ids.size(); ++i) (i == f ? folds[f].test_ids : folds[f].train_ids).push_back(ids[i]);
  }
  return folds;
}

std::vector<Fold> stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw Error("kfold: k must be >= 2");
  auto by_class = dataset.ids_by_class();
  for (const auto& ids : by_class)
    if (ids.size() < static_cast<std::size_t>(k))
      throw Error("kfold: every raga needs at least k = " + std::to_string(k) + " recordings");
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) folds[static_cast<std::size_t>(f)].name = "kfold_" + std::to_string(f);
  Rng rng(mix_seed(seed, 0xf01dULL));
  for (auto& ids : by_class) {
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t f = 0; f < folds.size(); ++f)
        (i % folds.size() == f ? folds[f].test_ids : folds[f].train_ids).push_back(ids[i]);
  }
  return folds;
}

Fold holdout_split(const Dataset& dataset, std::size_t test_per_class, std::uint64_t seed) {
  if (test_per_class < 1) throw Error("holdout: need at least one test recording per raga");
  auto by_class = dataset.ids_by_class();
  Fold fold{"holdout", {}, {}};
  Rng rng(mix_seed(seed, 0x401dULL));
  for (auto& ids : by_class) {
    if (ids.size() <= test_per_class) throw Error("holdout: a raga has too few recordings to hold some out");
    std::shuffle(ids.begin(), ids.end(), rng);
    fold.test_ids.insert(fold.test_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(test_per_class));
    fold.train_ids.insert(fold.train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(test_per_class), ids.end());
  }
  return fold;
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(int n_classes) : n_(n_classes) {
  if (n_classes < 0) throw Error("confusion matrix: negative class count");
  cells_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_ + 1), 0);
}

void ConfusionMatrix::add(int truth, std::optional<int> predicted) {
  if (truth < 0 || truth >= n_) throw Error("confusion matrix: true class out of range");
  const int col = predicted.value_or(n_);
  if (col < 0 || col > n_) throw Error("confusion matrix: predicted class out of range");
  ++cells_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(col)];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw Error("confusion matrix: class counts differ");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
}

std::size_t ConfusionMatrix::count(int truth, int predicted) const {
  if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_) throw Error("confusion matrix: index out of range");
  return cells_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::abstained(int truth) const {
  if (truth < 0 || truth >= n_) throw Error("confusion matrix: index out of range");
  return cells_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(n_)];
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(cells_.begin(), cells_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::correct() const {
  std::size_t c = 0;
  for (int i = 0; i < n_; ++i) c += count(i, i);
  return c;
}

double ConfusionMatrix::accuracy() const {
  const auto t = total();
  return t == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(t);
}

void ConfusionMatrix::write_csv(const std::filesystem::path& path, std::span<const std::string> labels) const {
  if (labels.size() != static_cast<std::size_t>(n_)) throw Error("confusion matrix: label count mismatch");
  std::ofstream out(path);
  if (!out) throw Error("confusion matrix: cannot open " + path.string() + " for writing");
  out << "true\\pred";
  for (const auto& l : labels) out << ',' << l;
  out << ",ABSTAIN\n";
  for (int t = 0; t < n_; ++t) {
    out << labels[static_cast<std::size_t>(t)];
    for (int p = 0; p <= n_; ++p)
      out << ',' << cells_[static_cast<std::size_t>(t) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(p)];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

double precision_at_k(std::span<const int> retrieved_labels, int query_label, std::size_t k) {
  if (k < 1) throw Error("precision_at_k: k must be >= 1");
  if (retrieved_labels.size() < k)
    throw Error("precision_at_k: only " + std::to_string(retrieved_labels.size()) + " results for k = " +
                std::to_string(k));
  const auto hits = std::count(retrieved_labels.begin(), retrieved_labels.begin() + static_cast<std::ptrdiff_t>(k),
                               query_label);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double average_precision(std::span<const double> per_query) {
  if (per_query.empty()) throw Error("average_precision: no queries");
  return std::accumulate(per_query.begin(), per_query.end(), 0.0) / static_cast<double>(per_query.size());
}

RetrievalScores evaluate_retrieval(const Ranker& ranker, std::span<const TokenSequence> items,
                                   std::span<const std::size_t> ks) {
  if (ks.empty()) throw Error("retrieval: no cutoffs given");
  const auto emb = embed_all(ranker, items);
  EmbeddingIndex index(static_cast<int>(emb.rows()));
  for (std::size_t i = 0; i < items.size(); ++i)
    index.add(std::span<const float>(emb.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(emb.rows())),
              {items[i].source_id, items[i].raga, items[i].offset});

  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  if (items.size() <= kmax)
    throw Error("retrieval: " + std::to_string(items.size()) + " items cannot fill a top-" + std::to_string(kmax) +
                " list once the query is excluded");
  RetrievalScores scores{{ks.begin(), ks.end()}, {}, items.size()};
  std::vector<std::vector<double>> per_query(ks.size());
  std::vector<int> labels;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto q = index.vector(i);
    const auto result = query_top_k(index, std::span<const float>(q.data(), static_cast<std::size_t>(q.size())), kmax, i);
    labels.clear();
    for (const auto& h : result.hits) labels.push_back(index.entry(h.row).raga);
    for (std::size_t j = 0; j < ks.size(); ++j) per_query[j].push_back(precision_at_k(labels, items[i].raga, ks[j]));
  }
  for (const auto& p : per_query) scores.mean_precision.push_back(average_precision(p));
  return scores;
}

// ---------------------------------------------------------------------------

FoldResult score_fold(std::span<const TokenSequence> recordings, const Fold& fold, const ModelConfig& model_cfg,
                      const ModelParams& params, std::size_t subseq_len) {
  FoldResult result{{}, ConfusionMatrix(model_cfg.n_classes), ConfusionMatrix(model_cfg.n_classes), {}, params};
  for (const auto& rec : select_recordings(recordings, fold.test_ids)) {
    std::vector<int> votes;
    for (const auto& w : split_for_inference(rec, subseq_len)) {
      votes.push_back(argmax(window_probs(params, model_cfg, w.ids)));
      result.window_cm.add(rec.raga, votes.back());
    }
    auto verdict = tally_votes(votes, model_cfg.n_classes);
    result.recording_cm.add(rec.raga, verdict.label);
    result.recordings.push_back({rec.source_id, rec.raga, std::move(verdict)});
  }
  return result;
}

FoldResult run_fold(std::span<const TokenSequence> recordings, const Fold& fold, const ExperimentConfig& cfg) {
  const auto train_recs = select_recordings(recordings, fold.train_ids);
  const auto samples =
      sample_training_set(train_recs, cfg.subseq_len, cfg.samples_per_recording, mix_seed(cfg.seed, 0x5a3bULL));
  ModelConfig model = cfg.model;
  model.subseq_len = static_cast<int>(cfg.subseq_len);
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  auto trained = train_classifier(samples, train, model);
  auto result = score_fold(recordings, fold, model, trained.params, cfg.subseq_len);
  result.report = std::move(trained.report);
  return result;
}

std::vector<LengthStudyRow> run_length_study(std::span<const TokenSequence> recordings, const Fold& fold,
                                             std::span<const std::size_t> lengths, const ExperimentConfig& base,
                                             double loss_threshold) {
  std::size_t longest = 0;
  for (const auto& r : select_recordings(recordings, fold.train_ids)) longest = std::max(longest, r.size());
  std::vector<LengthStudyRow> rows;
  for (std::size_t len : lengths) {
    ExperimentConfig cfg = base;
    cfg.subseq_len = len;
    cfg.train.loss_threshold = loss_threshold;
    cfg.train.stop_at_threshold = true;
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_fold(recordings, fold, cfg);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    LengthStudyRow row;
    row.subseq_len = len;
    row.samples_per_recording = cfg.samples_per_recording.value_or(compute_num_samples(longest, len));
    row.epochs_to_threshold = result.report.epochs_to_threshold;
    row.epochs_run = static_cast<int>(result.report.epochs.size());
    double epoch_s = 0.0;
    for (const auto& e : result.report.epochs) epoch_s += e.wall_s;
    row.mean_epoch_s = row.epochs_run > 0 ? epoch_s / row.epochs_run : 0.0;
    row.train_s = elapsed;
    row.holdout_accuracy = result.recording_cm.accuracy();
    rows.push_back(row);
  }
  return rows;
}

void write_length_study_csv(const std::filesystem::path& path, std::span<const LengthStudyRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error("length study: cannot open " + path.string() + " for writing");
  out << "subseq_len,epochs_to_converge,time_per_epoch_s,holdout_accuracy,samples_per_recording,epochs_run,train_s\n"
      << std::setprecision(6);
  for (const auto& r : rows) {
    out << r.subseq_len << ',';
    if (r.epochs_to_threshold)
      out << *r.epochs_to_threshold;
    else
      out << "NA";
    out << ',' << r.mean_epoch_s << ',' << r.holdout_accuracy << ',' << r.samples_per_recording << ',' << r.epochs_run
        << ',' << r.train_s << '\n';
  }
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

}  // namespace ragaseq
