#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ragaseq/checkpoint.hpp"
#include "ragaseq/classify.hpp"
#include "ragaseq/corpus.hpp"
#include "ragaseq/pipeline.hpp"
#include "ragaseq/pitch.hpp"
#include "ragaseq/rank.hpp"
#include "ragaseq/sampling.hpp"
#include "ragaseq/tokenize.hpp"
#include "ragaseq/train.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace ragaseq;

PYBIND11_MODULE(_ragaseq, m) {
  m.doc() = "Raga recognition by LSTM-attention sequence classification and triplet-loss retrieval";
  m.attr("__version__") = RAGASEQ_VERSION;
  py::register_exception<Error>(m, "RagaseqError", PyExc_ValueError);

  // --- tokens -------------------------------------------------------------
  m.def("normalize_cents", &normalize_cents, "f_hz"_a, "tonic_hz"_a, "Cents of f above the tonic");
  m.def("quantize", &quantize, "f_hz"_a, "tonic_hz"_a, "k"_a = 5, "Nearest 1/k of a half step, relative to the tonic");
  m.def("compute_num_samples", &compute_num_samples, "max_len"_a, "subseq_len"_a,
        "Subsequences drawn per recording: ceil(2.2 * max_len / subseq_len)");

  py::class_<QuantizerConfig>(m, "QuantizerConfig")
      .def(py::init<>())
      .def_readwrite("k", &QuantizerConfig::k)
      .def_readwrite("clamp_octaves", &QuantizerConfig::clamp_octaves)
      .def_readwrite("rest_token", &QuantizerConfig::rest_token);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<const QuantizerConfig&>(), "config"_a = QuantizerConfig{})
      .def_readonly_static("PAD", &Vocabulary::kPad)
      .def_readonly_static("OOV", &Vocabulary::kOov)
      .def_property_readonly("size", &Vocabulary::size)
      .def("id_of", &Vocabulary::id_of, "value"_a)
      .def("value_of", &Vocabulary::value_of, "id"_a);

  m.def(
      "values_to_ids",
      [](const std::vector<int>& values, const Vocabulary& vocab) { return values_to_ids(values, vocab); },
      "values"_a, "vocab"_a = Vocabulary{});

  py::class_<TokenSequence>(m, "TokenSequence")
      .def(py::init([](std::vector<int> ids, std::string source_id, int raga, std::size_t offset) {
             return TokenSequence{std::move(ids), std::move(source_id), raga, offset};
           }),
           "ids"_a, "source_id"_a = "", "raga"_a = -1, "offset"_a = 0)
      .def_readwrite("ids", &TokenSequence::ids)
      .def_readwrite("source_id", &TokenSequence::source_id)
      .def_readwrite("raga", &TokenSequence::raga)
      .def_readwrite("offset", &TokenSequence::offset)
      .def("__len__", &TokenSequence::size)
      .def("__repr__", [](const TokenSequence& s) {
        return "<TokenSequence " + s.source_id + " raga=" + std::to_string(s.raga) + " len=" + std::to_string(s.size()) +
               ">";
      });

  m.def(
      "sample_subsequences",
      [](const TokenSequence& seq, std::size_t subseq_len, std::size_t count, std::uint64_t seed) {
        Rng rng(seed);
        return sample_subsequences(seq, subseq_len, count, rng);
      },
      "seq"_a, "subseq_len"_a, "count"_a, "seed"_a = 0);
  m.def("split_for_inference", &split_for_inference, "seq"_a, "subseq_len"_a);

  // --- pitch --------------------------------------------------------------
  py::class_<PitchConfig>(m, "PitchConfig")
      .def(py::init<>())
      .def_readwrite("fmin_hz", &PitchConfig::fmin_hz)
      .def_readwrite("fmax_hz", &PitchConfig::fmax_hz)
      .def_readwrite("hop_s", &PitchConfig::hop_s)
      .def_readwrite("frame_s", &PitchConfig::frame_s)
      .def_readwrite("voicing_threshold", &PitchConfig::voicing_threshold)
      .def_readwrite("octave_cost", &PitchConfig::octave_cost);

  m.def(
      "track_pitch",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> samples, double sample_rate,
         const PitchConfig& cfg) {
        if (samples.ndim() != 1) throw Error("track_pitch: expected a 1-D array of samples");
        const auto contour =
            track_pitch(std::span<const float>(samples.data(), static_cast<std::size_t>(samples.size())), sample_rate, cfg);
        py::array_t<double> times(static_cast<py::ssize_t>(contour.frames.size()));
        py::array_t<double> f0(static_cast<py::ssize_t>(contour.frames.size()));
        auto t = times.mutable_unchecked<1>();
        auto f = f0.mutable_unchecked<1>();
        for (std::size_t i = 0; i < contour.frames.size(); ++i) {
          t(static_cast<py::ssize_t>(i)) = contour.frames[i].t;
          f(static_cast<py::ssize_t>(i)) = contour.frames[i].f0_hz;
        }
        return py::make_tuple(times, f0);
      },
      "samples"_a, "sample_rate"_a, "config"_a = PitchConfig{},
      "Returns (times_s, f0_hz) arrays; unvoiced frames have f0 = 0");

  // --- corpus -------------------------------------------------------------
  py::class_<ManifestEntry>(m, "ManifestEntry")
      .def_readonly("id", &ManifestEntry::id)
      .def_readonly("audio_path", &ManifestEntry::audio_path)
      .def_readonly("token_path", &ManifestEntry::token_path)
      .def_readonly("tonic_hz", &ManifestEntry::tonic_hz)
      .def_readonly("raga", &ManifestEntry::raga);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("entries", &Dataset::entries)
      .def_property_readonly("num_classes", &Dataset::num_classes)
      .def("label_of", &Dataset::label_of, "class_index"_a)
      .def("class_of", py::overload_cast<const std::string&>(&Dataset::class_of, py::const_), "raga"_a)
      .def("__len__", &Dataset::size);

  m.def("load_manifest", &load_manifest, "path"_a);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_ragas", &SynthConfig::n_ragas)
      .def_readwrite("recordings_per_raga", &SynthConfig::recordings_per_raga)
      .def_readwrite("seq_len", &SynthConfig::seq_len)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("render_audio", &SynthConfig::render_audio)
      .def_readwrite("k_levels", &SynthConfig::k_levels)
      .def_readwrite("tonic_hz", &SynthConfig::tonic_hz)
      .def_readwrite("allied_contrast", &SynthConfig::allied_contrast);

  m.def("generate_synthetic_corpus", &generate_synthetic_corpus, "config"_a, "out_dir"_a);
  m.def(
      "load_recordings", [](const Dataset& ds) { return load_recordings(ds, FrontEndConfig{}); }, "dataset"_a,
      "Token sequences for every manifest entry, with the default front end");
  m.def(
      "sample_training_set",
      [](const std::vector<TokenSequence>& recs, std::size_t subseq_len, std::optional<std::size_t> per_recording,
         std::uint64_t seed) { return sample_training_set(recs, subseq_len, per_recording, seed); },
      "recordings"_a, "subseq_len"_a, "per_recording"_a = py::none(), "seed"_a = 0);

  // --- model and training -------------------------------------------------
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def_readwrite("lstm_hidden", &ModelConfig::lstm_hidden)
      .def_readwrite("attention_dim", &ModelConfig::attention_dim)
      .def_readwrite("dense1_units", &ModelConfig::dense1_units)
      .def_readwrite("n_classes", &ModelConfig::n_classes)
      .def_readwrite("dropout_rate", &ModelConfig::dropout_rate)
      .def_readwrite("embedding_head", &ModelConfig::embedding_head)
      .def_readwrite("embedding_dim", &ModelConfig::embedding_dim)
      .def_readwrite("subseq_len", &ModelConfig::subseq_len)
      .def("validate", &ModelConfig::validate)
      .def("to_json", &config_to_json);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("workers", &TrainConfig::workers)
      .def_readwrite("staleness_bound", &TrainConfig::staleness_bound)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("loss_threshold", &TrainConfig::loss_threshold)
      .def_readwrite("stop_at_threshold", &TrainConfig::stop_at_threshold);

  py::class_<ModelParams>(m, "ModelParams");

  py::class_<TrainReport>(m, "TrainReport")
      .def_property_readonly("losses",
                             [](const TrainReport& r) {
                               std::vector<double> out;
                               for (const auto& e : r.epochs) out.push_back(e.loss);
                               return out;
                             })
      .def_readonly("epochs_to_threshold", &TrainReport::epochs_to_threshold)
      .def_readonly("submitted", &TrainReport::submitted)
      .def_readonly("applied", &TrainReport::applied)
      .def_readonly("discarded", &TrainReport::discarded);

  m.def(
      "train_classifier",
      [](const std::vector<TokenSequence>& samples, const TrainConfig& cfg, const ModelConfig& model) {
        TrainResult<ModelParams> r;
        {
          py::gil_scoped_release release;
          r = train_classifier(samples, cfg, model);
        }
        return py::make_tuple(std::move(r.params), std::move(r.report));
      },
      "samples"_a, "config"_a, "model"_a, "Returns (params, report)");

  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init<ModelConfig, ModelParams>(), "config"_a, "params"_a)
      .def_readonly("config", &Checkpoint::config)
      .def_readonly("params", &Checkpoint::params);
  m.def(
      "save_checkpoint", [](const std::filesystem::path& p, const Checkpoint& c) { save_checkpoint(p, c.config, c.params); },
      "path"_a, "checkpoint"_a);
  m.def("load_checkpoint", py::overload_cast<const std::filesystem::path&>(&load_checkpoint), "path"_a);

  // --- classification -----------------------------------------------------
  py::class_<Verdict>(m, "Verdict")
      .def_readonly("label", &Verdict::label)
      .def_readonly("vote_fractions", &Verdict::vote_fractions)
      .def_readonly("majority_fraction", &Verdict::majority_fraction)
      .def_readonly("windows", &Verdict::windows)
      .def_property_readonly("abstained", &Verdict::abstained);

  m.def(
      "tally_votes",
      [](const std::vector<int>& votes, int n_classes, double threshold) { return tally_votes(votes, n_classes, threshold); },
      "votes"_a, "n_classes"_a, "threshold"_a = kMajorityThreshold);
  m.def(
      "window_probs",
      [](const Checkpoint& c, const std::vector<int>& tokens) { return window_probs(c.params, c.config, tokens); },
      "model"_a, "tokens"_a);
  m.def(
      "classify_recording",
      [](const Checkpoint& c, const TokenSequence& seq, std::size_t subseq_len) {
        return classify_recording(c.params, c.config, seq, subseq_len);
      },
      "model"_a, "recording"_a, "subseq_len"_a);
  m.def(
      "classify_recording_ensemble",
      [](const std::vector<Checkpoint>& members, const TokenSequence& seq, std::size_t subseq_len) {
        return classify_recording(members, seq, subseq_len);
      },
      "models"_a, "recording"_a, "subseq_len"_a);

  // --- retrieval ----------------------------------------------------------
  py::class_<IndexEntry>(m, "IndexEntry")
      .def_readonly("source_id", &IndexEntry::source_id)
      .def_readonly("raga", &IndexEntry::raga)
      .def_readonly("offset", &IndexEntry::offset);

  py::class_<EmbeddingIndex>(m, "EmbeddingIndex")
      .def(py::init<int>(), "dim"_a)
      .def_property_readonly("dim", &EmbeddingIndex::dim)
      .def("__len__", &EmbeddingIndex::size)
      .def("entry", &EmbeddingIndex::entry, "row"_a)
      .def(
          "vector", [](const EmbeddingIndex& ix, std::size_t i) { return Eigen::VectorXf(ix.vector(i)); }, "row"_a)
      .def(
          "add",
          [](EmbeddingIndex& ix, const std::vector<float>& v, std::string source_id, int raga, std::size_t offset) {
            ix.add(v, IndexEntry{std::move(source_id), raga, offset});
          },
          "embedding"_a, "source_id"_a, "raga"_a = -1, "offset"_a = 0)
      .def("save", &EmbeddingIndex::save, "path"_a)
      .def_static("load", &EmbeddingIndex::load, "path"_a);

  m.def(
      "query_top_k",
      [](const EmbeddingIndex& ix, const std::vector<float>& q, std::size_t k, std::optional<std::size_t> exclude) {
        const auto r = query_top_k(ix, q, k, exclude);
        py::list hits;
        for (const auto& h : r.hits) hits.append(py::make_tuple(h.row, h.distance));
        return hits;
      },
      "index"_a, "query"_a, "k"_a, "exclude"_a = py::none(), "List of (row, squared distance), nearest first");

  m.def(
      "embed",
      [](const Checkpoint& c, const std::vector<int>& tokens) {
        if (!c.config.embedding_head) throw Error("embed: checkpoint is not a ranker");
        return embed(Ranker{c.config, c.params}, tokens);
      },
      "ranker"_a, "tokens"_a);
}
