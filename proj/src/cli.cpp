// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/cli.hpp"

#include <omp.h>

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "msep/dataset.hpp"
#include "msep/embeddings.hpp"
#include "msep/errors.hpp"
#include "msep/evaluate.hpp"
#include "msep/gradcheck.hpp"
#include "msep/synth.hpp"
#include "msep/train.hpp"
#include "msep/wav.hpp"

namespace fs = std::filesystem;

namespace msep {

namespace {

struct GlobalOpts {
  uint64_t seed = 1;
  std::string profile = "desk";
  int threads = 0;
  bool deterministic = false;

  Profile prof() const { return parse_profile(profile); }

  void apply() const {
    if (deterministic)
      omp_set_num_threads(1);
    else if (threads > 0)
      omp_set_num_threads(threads);
  }
};

int run_synth(const GlobalOpts& g, const std::string& out, int speakers, int utts, double seconds) {
  CorpusDefaults cd = corpus_defaults(g.prof());
  CorpusSpec spec;
  spec.n_speakers = speakers > 0 ? speakers : cd.n_speakers;
  spec.utterances_per_speaker = utts > 0 ? utts : cd.utterances_per_speaker;
  spec.utterance_seconds = seconds > 0 ? seconds : cd.utterance_seconds;
  spec.sample_rate = cd.sample_rate;
  spec.seed = g.seed;
  CorpusIndex idx = synth_corpus(spec, out);
  std::cout << "synth: wrote " << idx.utterances.size() << " utterances for "
            << idx.speakers.size() << " speakers to " << out << "\n";
  return kExitOk;
}

int run_mix(const GlobalOpts& g, const std::string& corpus, const std::string& out, long n_train,
            long n_test, double clip_seconds, double snr_db, bool have_snr) {
  MixConfig cfg;
  cfg.n_train = n_train;
  cfg.n_test = n_test;
  cfg.clip_seconds = clip_seconds;
  cfg.seed = g.seed;
  if (have_snr) cfg.snr_db = snr_db;
  MixResult r = build_mixtures(corpus, out, cfg);
  std::cout << "mix: wrote " << r.train_manifest << " (" << n_train << ") and " << r.test_manifest
            << " (" << n_test << ")\n";
  return kExitOk;
}

int run_embed(const GlobalOpts& g, const std::string& corpus_dir, const std::string& kind_str,
              int dim, double pose_sigma, const std::string& out) {
  CorpusIndex corpus = load_corpus(corpus_dir);
  EmbeddingKind kind = parse_kind(kind_str);
  EmbeddingDefaults ed = embedding_defaults(g.prof());
  if (dim <= 0) dim = kind == EmbeddingKind::voice ? ed.d_voice : ed.d_face;
  if (pose_sigma < 0) pose_sigma = ed.pose_sigma;

  std::vector<ConditionEmbedding> embs;
  if (kind == EmbeddingKind::voice) {
    StftConfig cfg = stft_defaults(g.prof());
    for (const auto& u : corpus.utterances) {
      Waveform w = read_wav((fs::path(corpus_dir) / u.wav_path).string());
      ConditionEmbedding e = voice_embedding_oracle(w, dim, cfg);
      e.speaker_id = u.speaker_id;
      e.source_id = "utt" + std::to_string(u.utt_index);
      embs.push_back(std::move(e));
    }
  } else {
    for (const auto& spk : corpus.speakers)
      for (uint32_t v = 0; v < 10; ++v)
        embs.push_back(face_embedding_synthetic(spk, v, pose_sigma, dim));
  }
  save_embeddings(out, embs);
  std::cout << "embed: wrote " << embs.size() << " " << kind_str << " embeddings (dim " << dim
            << ") to " << out << "\n";
  return kExitOk;
}

int run_train(const GlobalOpts& g, const std::string& manifest, const std::string& mode_str,
              int epochs, int batch, const std::string& out, double lr, double anneal,
              double pose_sigma, const std::string& resume_from) {
  TrainConfig cfg;
  cfg.mode = parse_mode(mode_str);
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.initial_lr = lr;
  cfg.anneal_divisor = anneal;
  cfg.seed = g.seed;
  cfg.checkpoint_dir = out;
  cfg.profile = g.prof();
  cfg.deterministic = g.deterministic;
  cfg.pose_sigma = pose_sigma;
  TrainResult r = resume_from.empty() ? train(manifest, cfg) : resume(resume_from, manifest, cfg);
  std::cout << "train: wrote " << r.last_checkpoint << " (best: " << r.best_checkpoint << ")\n";
  return kExitOk;
}

int run_separate(const std::string& checkpoint, const std::string& mix_path,
                 const std::string& voice_file, const std::string& face_file,
                 const std::string& speaker, const std::string& out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const ModelConfig& m = ck.net.config();

  auto pick = [&](const std::string& path, EmbeddingKind kind) {
    std::vector<ConditionEmbedding> embs = load_embeddings(path);
    for (auto& e : embs) {
      if (e.kind != kind)
        throw ValidationError("separate: " + path + " holds " + to_string(e.kind) +
                              " embeddings, expected " + to_string(kind));
      if (speaker.empty() || e.speaker_id == speaker) return e.values;
    }
    throw ValidationError("separate: no embedding for speaker '" + speaker + "' in " + path);
  };

  std::vector<float> voice, face;
  if (m.uses_voice()) {
    if (voice_file.empty())
      throw ValidationError("separate: checkpoint mode " + to_string(m.mode) +
                            " requires --voice-emb");
    voice = pick(voice_file, EmbeddingKind::voice);
  }
  if (m.uses_face()) {
    if (face_file.empty())
      throw ValidationError("separate: checkpoint mode " + to_string(m.mode) +
                            " requires --face-emb");
    face = pick(face_file, EmbeddingKind::face);
  }

  Waveform mix = read_wav(mix_path);
  Waveform est = separate(mix, m.uses_voice() ? &voice : nullptr,
                          m.uses_face() ? &face : nullptr, ck);
  write_wav(out, est);
  std::cout << "separate: wrote " << out << " (" << est.samples.size() << " samples)\n";
  return kExitOk;
}

int run_eval(const GlobalOpts& g, const std::string& manifest, const std::string& checkpoint,
             const std::string& hyp, const std::string& report, const std::string& csv,
             const std::string& mode_str, double pose_sigma) {
  Checkpoint ck = load_checkpoint(checkpoint);
  ConditioningMode mode =
      mode_str.empty() ? ck.net.config().mode : parse_mode(mode_str);
  EvalConfig cfg;
  cfg.pose_sigma = pose_sigma;
  cfg.seed = g.seed;
  EvalResult r = evaluate_separation(manifest, checkpoint, mode, hyp, cfg);
  write_report_json(report, r);
  if (!csv.empty()) write_report_csv(csv, r);
  std::cout << "eval: mode=" << r.sdr.mode << " mean_sdr=" << r.sdr.mean_db << " dB (+/- "
            << r.sdr.std_db << ", " << r.sdr.std_kind << "), baseline=" << r.sdr.baseline_mean_db
            << " dB over " << r.sdr.n_items << " items\n";
  if (r.wer) std::cout << "eval: pooled wer=" << r.wer->wer << "\n";
  return kExitOk;
}

int run_swaptest(const GlobalOpts& g, const std::string& manifest, const std::string& checkpoint,
                 double pose_sigma) {
  EvalConfig cfg;
  cfg.pose_sigma = pose_sigma;
  cfg.seed = g.seed;
  SwapTestResult r = swap_test(manifest, checkpoint, cfg);
  std::cout << "swaptest: " << r.successes << "/" << r.trials << " correct (fraction "
            << r.fraction << ")\n";
  return kExitOk;
}

int run_gradcheck_cmd() {
  auto cases = run_gradcheck();
  bool all_pass = true;
  for (const auto& c : cases) {
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  max_rel_err=" << c.max_rel_err
              << " (tol " << c.tolerance << ")\n";
    all_pass = all_pass && c.pass;
  }
  if (!all_pass) {
    std::cerr << "gradcheck: FAILURES detected\n";
    return kExitNumerical;
  }
  std::cout << "gradcheck: all " << cases.size() << " cases passed\n";
  return kExitOk;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  CLI::App app{"speaker-conditioned target speech separation"};
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global random seed")->envname("MSEP_SEED");
  app.add_option("--profile", g.profile, "dsp/model profile: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->envname("MSEP_PROFILE");
  app.add_option("--threads", g.threads, "worker thread cap (0 = library default)")
      ->envname("MSEP_THREADS");
  app.add_flag("--deterministic", g.deterministic,
               "single-threaded, reproducible runs with zeroed timing fields")
      ->envname("MSEP_DETERMINISTIC");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic speaker corpus");
  std::string synth_out;
  int synth_speakers = 0, synth_utts = 0;
  double synth_seconds = 0;
  synth->add_option("--out", synth_out, "output corpus directory")->required();
  synth->add_option("--speakers", synth_speakers, "number of speakers");
  synth->add_option("--utts-per-speaker", synth_utts, "utterances per speaker");
  synth->add_option("--seconds", synth_seconds, "utterance length in seconds");

  // mix
  auto* mix = app.add_subcommand("mix", "build two-speaker mixture train/test sets");
  std::string mix_corpus, mix_out;
  long mix_train = 2000, mix_test = 200;
  double mix_clip = 3.0, mix_snr = 0.0;
  mix->add_option("--corpus", mix_corpus, "corpus directory from synth")->required();
  mix->add_option("--out", mix_out, "output dataset directory")->required();
  mix->add_option("--train", mix_train, "number of training mixtures");
  mix->add_option("--test", mix_test, "number of test mixtures");
  mix->add_option("--clip-seconds", mix_clip, "crop length in seconds");
  auto* snr_opt = mix->add_option("--snr-db", mix_snr, "scale interferer to this SNR (default: unity-gain addition)");

  // embed
  auto* embed = app.add_subcommand("embed", "write an EMB1 embedding file for a corpus");
  std::string embed_corpus, embed_kind, embed_out;
  int embed_dim = 0;
  double embed_sigma = -1;
  embed->add_option("--corpus", embed_corpus, "corpus directory")->required();
  embed->add_option("--kind", embed_kind, "voice or face")
      ->check(CLI::IsMember({"voice", "face"}))
      ->required();
  embed->add_option("--dim", embed_dim, "embedding dimension (default per profile)");
  embed->add_option("--pose-sigma", embed_sigma, "face pose jitter (default per profile)");
  embed->add_option("--out", embed_out, "output EMB1 file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a mask estimation model");
  std::string train_manifest, train_mode = "voice", train_out, train_resume;
  int train_epochs = 30, train_batch = 8;
  double train_lr = 1e-3, train_anneal = 1.1, train_sigma = 0.4;
  train_cmd->add_option("--manifest", train_manifest, "training manifest (jsonl)")->required();
  train_cmd->add_option("--mode", train_mode, "conditioning mode")
      ->check(CLI::IsMember({"voice", "face", "voice_and_face"}));
  train_cmd->add_option("--epochs", train_epochs, "number of epochs");
  train_cmd->add_option("--batch", train_batch, "batch size");
  train_cmd->add_option("--out", train_out, "checkpoint directory")->required();
  train_cmd->add_option("--lr", train_lr, "initial learning rate");
  train_cmd->add_option("--anneal", train_anneal, "per-epoch learning-rate divisor");
  train_cmd->add_option("--pose-sigma", train_sigma, "face pose jitter");
  train_cmd->add_option("--resume", train_resume, "continue from this checkpoint");

  // separate
  auto* sep = app.add_subcommand("separate", "separate a target speaker from a mixture wav");
  std::string sep_ckpt, sep_mix, sep_voice, sep_face, sep_speaker, sep_out;
  sep->add_option("--checkpoint", sep_ckpt, "trained checkpoint")->required();
  sep->add_option("--mix", sep_mix, "input mixture wav")->required();
  sep->add_option("--voice-emb", sep_voice, "EMB1 file with voice embeddings");
  sep->add_option("--face-emb", sep_face, "EMB1 file with face embeddings");
  sep->add_option("--speaker", sep_speaker, "speaker id to select from the embedding files");
  sep->add_option("--out", sep_out, "output wav")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score separation quality on a test manifest");
  std::string eval_manifest, eval_ckpt, eval_hyp, eval_report, eval_csv, eval_mode;
  double eval_sigma = 0.4;
  eval_cmd->add_option("--manifest", eval_manifest, "test manifest (jsonl)")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
  eval_cmd->add_option("--hyp", eval_hyp, "hypothesis transcripts (jsonl) for WER");
  eval_cmd->add_option("--report", eval_report, "output JSON report")->required();
  eval_cmd->add_option("--csv", eval_csv, "optional per-item CSV");
  eval_cmd->add_option("--mode", eval_mode, "conditioning mode (default: checkpoint's)");
  eval_cmd->add_option("--pose-sigma", eval_sigma, "face pose jitter");

  // swaptest
  auto* swap = app.add_subcommand("swaptest", "conditioning-swap discrimination test");
  std::string swap_manifest, swap_ckpt;
  double swap_sigma = 0.4;
  swap->add_option("--manifest", swap_manifest, "test manifest (jsonl)")->required();
  swap->add_option("--checkpoint", swap_ckpt, "trained checkpoint")->required();
  swap->add_option("--pose-sigma", swap_sigma, "face pose jitter");

  // gradcheck
  app.add_subcommand("gradcheck", "finite-difference verification of every differentiable op");

  app.require_subcommand(1);

  std::vector<std::string> argv(args);
  std::reverse(argv.begin(), argv.end());  // CLI11 parses reversed vectors
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    g.apply();
    if (app.got_subcommand("synth"))
      return run_synth(g, synth_out, synth_speakers, synth_utts, synth_seconds);
    if (app.got_subcommand("mix"))
      return run_mix(g, mix_corpus, mix_out, mix_train, mix_test, mix_clip, mix_snr,
                     snr_opt->count() > 0);
    if (app.got_subcommand("embed"))
      return run_embed(g, embed_corpus, embed_kind, embed_dim, embed_sigma, embed_out);
    if (app.got_subcommand("train"))
      return run_train(g, train_manifest, train_mode, train_epochs, train_batch, train_out,
                       train_lr, train_anneal, train_sigma, train_resume);
    if (app.got_subcommand("separate"))
      return run_separate(sep_ckpt, sep_mix, sep_voice, sep_face, sep_speaker, sep_out);
    if (app.got_subcommand("eval"))
      return run_eval(g, eval_manifest, eval_ckpt, eval_hyp, eval_report, eval_csv, eval_mode,
                      eval_sigma);
    if (app.got_subcommand("swaptest"))
      return run_swaptest(g, swap_manifest, swap_ckpt, swap_sigma);
    if (app.got_subcommand("gradcheck")) return run_gradcheck_cmd();
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace msep
