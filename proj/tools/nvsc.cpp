// Command-line front door: codebook training, encoding, classic and neural
// decoding, model training, and metrics.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>

#include "nvsc/checkpoint.hpp"
#include "nvsc/codec.hpp"
#include "nvsc/metrics.hpp"
#include "nvsc/pipeline.hpp"
#include "nvsc/synthesis.hpp"

namespace fs = std::filesystem;
using namespace nvsc;

namespace {

std::vector<AudioBuffer> load_corpus(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      paths.push_back(entry.path().string());
  }
  if (paths.empty()) throw FormatError("no .wav files in " + dir);
  std::sort(paths.begin(), paths.end());
  std::vector<AudioBuffer> corpus;
  corpus.reserve(paths.size());
  for (const std::string& p : paths) corpus.push_back(read_wav(p));
  return corpus;
}

int run(int argc, char** argv) {
  CLI::App app{"nvsc: scalable-bitrate wide-band speech codec"};
  app.require_subcommand(1);

  uint64_t seed = kDefaultSeed;
  app.add_option("--seed", seed, "base seed for all derived random streams");

  // train-codebooks
  auto* cmd_books = app.add_subcommand("train-codebooks", "train GMM/VQ codebooks from a WAV directory");
  std::string books_dir, books_out, books_op = "all";
  int gmm_components = 8, gmm_iters = 30;
  cmd_books->add_option("--input", books_dir, "directory of 16 kHz mono WAV files")->required();
  cmd_books->add_option("--out", books_out, "output .nvcb path")->required();
  cmd_books->add_option("--op", books_op, "operating point (5.6|6.4|8.0|all)");
  cmd_books->add_option("--gmm-components", gmm_components);
  cmd_books->add_option("--gmm-iters", gmm_iters);

  // encode
  auto* cmd_encode = app.add_subcommand("encode", "encode a WAV file to an .nvsc bitstream");
  std::string enc_in, enc_books, enc_op, enc_out;
  cmd_encode->add_option("--in", enc_in, "input WAV")->required();
  cmd_encode->add_option("--codebooks", enc_books, ".nvcb file")->required();
  cmd_encode->add_option("--op", enc_op, "operating point (5.6|6.4|8.0)")->required();
  cmd_encode->add_option("--out", enc_out, "output .nvsc path")->required();

  // decode
  auto* cmd_decode = app.add_subcommand("decode", "decode an .nvsc bitstream to WAV");
  std::string dec_in, dec_books, dec_mode = "classic", dec_ckpt, dec_out;
  cmd_decode->add_option("--in", dec_in, "input .nvsc")->required();
  cmd_decode->add_option("--codebooks", dec_books, ".nvcb file")->required();
  cmd_decode->add_option("--mode", dec_mode, "classic | neural");
  cmd_decode->add_option("--checkpoint", dec_ckpt, "model checkpoint (neural mode)");
  cmd_decode->add_option("--out", dec_out, "output WAV path")->required();

  // train-model
  auto* cmd_train = app.add_subcommand("train-model", "train the SampleRNN decoder");
  std::string tr_dir, tr_books, tr_op, tr_out;
  TrainLoopOptions tr_options;
  bool tr_f64 = false;
  long tr_steps = 0;
  cmd_train->add_option("--input", tr_dir, "directory of WAV files")->required();
  cmd_train->add_option("--codebooks", tr_books)->required();
  cmd_train->add_option("--op", tr_op, "operating point the model is trained for")->required();
  cmd_train->add_option("--out", tr_out, "output checkpoint path")->required();
  cmd_train->add_option("--hidden", tr_options.model.hidden, "hidden units (paper: 1024)");
  cmd_train->add_option("--n-mix", tr_options.model.n_mix, "logistic mixture components");
  cmd_train->add_option("--batch", tr_options.trainer.batch, "batch size (paper: 24)");
  cmd_train->add_option("--seq-len", tr_options.trainer.seq_len, "TBPTT length (paper: 6400)");
  cmd_train->add_option("--lr", tr_options.trainer.lr, "initial learning rate");
  cmd_train->add_option("--epochs", tr_options.epochs);
  cmd_train->add_option("--steps", tr_steps, "stop after this many steps (0 = use --epochs)");
  cmd_train->add_flag("--f64", tr_f64, "64-bit arithmetic (bit-exact resume; slower)");
  bool tr_embedded = false;
  cmd_train->add_flag("--embedded", tr_embedded, "train on dim-30 embedded conditioning");

  // metrics
  auto* cmd_metrics = app.add_subcommand("metrics", "objective measurements");
  auto* m_sd = cmd_metrics->add_subcommand("sd", "spectral distortion between two WAV files");
  std::string sd_ref, sd_test;
  int sd_order = 16;
  m_sd->add_option("ref", sd_ref)->required();
  m_sd->add_option("test", sd_test)->required();
  m_sd->add_option("--order", sd_order, "LPC order");
  auto* m_snr = cmd_metrics->add_subcommand("snr", "SNR between two WAV files");
  std::string snr_ref, snr_test;
  m_snr->add_option("ref", snr_ref)->required();
  m_snr->add_option("test", snr_test)->required();
  auto* m_rate = cmd_metrics->add_subcommand("bitrate", "measured bitrate of an .nvsc stream");
  std::string rate_stream;
  m_rate->add_option("stream", rate_stream)->required();
  cmd_metrics->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  if (cmd_books->parsed()) {
    CodebookTrainOptions options;
    options.seed = seed;
    options.gmm_components = gmm_components;
    options.gmm_iters = gmm_iters;
    if (books_op != "all") options.ops = {OperatingPoint::parse(books_op)};
    CodebookTrainReport report;
    const CodebookSet books = train_codebooks(load_corpus(books_dir), options, &report);
    write_codebooks(books, books_out);
    for (const auto& [id, rate] : report.realized_rates)
      std::cout << "CALIBRATION op=" << op_point_name(id) << " lsp_bits_per_frame=" << rate
                << " budget=" << OperatingPoint::get(id).lsp_bit_budget << "\n";
    std::cout << "wrote " << books_out << "\n";
  }

  if (cmd_encode->parsed()) {
    const CodebookSet books = read_codebooks(enc_books);
    const OperatingPoint& op = OperatingPoint::get(OperatingPoint::parse(enc_op));
    const AudioBuffer audio = read_wav(enc_in);
    const EncodeResult enc = encode_audio(audio, op, books);
    write_stream(enc.frames, op, books, enc_out);
    std::cout << bitrate_record(enc_out) << "\n";
  }

  if (cmd_decode->parsed()) {
    const CodebookSet books = read_codebooks(dec_books);
    if (dec_mode == "classic") {
      write_wav(dec_out, decode_classic(dec_in, books, seed));
    } else if (dec_mode == "neural") {
      if (dec_ckpt.empty()) throw FormatError("neural mode requires --checkpoint");
      const auto [op_id, frames] = read_stream(dec_in, books);
      if (checkpoint_scalar_width(dec_ckpt) == 8) {
        const SampleRnn<double> model = load_checkpoint<double>(dec_ckpt);
        write_wav(dec_out, decode_neural(frames, op_id, books, model, seed));
      } else {
        const SampleRnn<float> model = load_checkpoint<float>(dec_ckpt);
        write_wav(dec_out, decode_neural(frames, op_id, books, model, seed));
      }
    } else {
      throw FormatError("unknown decode mode '" + dec_mode + "' (classic | neural)");
    }
    std::cout << "wrote " << dec_out << "\n";
  }

  if (cmd_train->parsed()) {
    const CodebookSet books = read_codebooks(tr_books);
    const OperatingPoint& op = OperatingPoint::get(OperatingPoint::parse(tr_op));
    tr_options.model.cond_dim = tr_embedded ? 30 : op.lpc_order + 8;
    tr_options.seed = seed;
    tr_options.max_steps = tr_steps;
    tr_options.checkpoint_path = tr_out;
    const std::vector<AudioBuffer> corpus = load_corpus(tr_dir);
    if (tr_f64) {
      auto ds = build_dataset<double>(corpus, op, books, tr_options.model.cond_dim);
      auto result = run_training(ds, tr_options, std::cout);
      result.model.scaler = scaler_from(books);
      save_checkpoint(tr_out, result.model);
    } else {
      auto ds = build_dataset<float>(corpus, op, books, tr_options.model.cond_dim);
      auto result = run_training(ds, tr_options, std::cout);
      result.model.scaler = scaler_from(books);
      save_checkpoint(tr_out, result.model);
    }
    std::cout << "wrote " << tr_out << "\n";
  }

  if (cmd_metrics->parsed()) {
    if (m_sd->parsed()) {
      AnalysisConfig config;
      config.lpc_order = sd_order;
      const auto ref_frames = analyze(read_wav(sd_ref), config);
      const auto test_frames = analyze(read_wav(sd_test), config);
      const size_t n = std::min(ref_frames.size(), test_frames.size());
      std::vector<std::pair<Vec, Vec>> pairs;
      for (size_t i = 0; i < n; ++i) {
        if (ref_frames[i].s <= 1e-6 || test_frames[i].s <= 1e-6) continue;  // skip silence
        pairs.emplace_back(ref_frames[i].lpc, test_frames[i].lpc);
      }
      std::cout << distortion_report(pairs).to_record() << "\n";
    }
    if (m_snr->parsed()) {
      const AudioBuffer ref = read_wav(snr_ref);
      const AudioBuffer test = read_wav(snr_test);
      const Eigen::Index n = std::min(ref.samples.size(), test.samples.size());
      std::cout << snr_record(ref.samples.head(n), test.samples.head(n)) << "\n";
    }
    if (m_rate->parsed()) std::cout << bitrate_record(rate_stream) << "\n";
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
