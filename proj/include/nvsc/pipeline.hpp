#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "nvsc/checkpoint.hpp"
#include "nvsc/codec.hpp"
#include "nvsc/conditioning.hpp"
#include "nvsc/samplernn.hpp"
#include "nvsc/trainer.hpp"

namespace nvsc {

// ---- dataset ------------------------------------------------------------------

template <typename T>
struct TrainDataset {
  std::vector<std::vector<int16_t>> samples;  // one entry per utterance
  std::vector<MatX<T>> cond;                  // decoded conditioning, cond_dim x frames
};

// Encode + locally decode each utterance and build the conditioning the
// decoder will actually see. Utterances are trimmed to whole frames.
template <typename T>
TrainDataset<T> build_dataset(const std::vector<AudioBuffer>& corpus, const OperatingPoint& op,
                              const CodebookSet& books, int cond_dim) {
  const ConditioningScaler scaler = scaler_from(books);
  TrainDataset<T> ds;
  for (const AudioBuffer& audio : corpus) {
    const long n = (audio.samples.size() / kFrameLength) * kFrameLength;
    if (n == 0) continue;
    AudioBuffer trimmed;
    trimmed.samples = audio.samples.head(n);
    const EncodeResult enc = encode_audio(trimmed, op, books);
    const Mat cond = conditioning_matrix(enc.decoded_local, scaler, cond_dim);
    ds.samples.push_back(to_pcm16(trimmed.samples));
    ds.cond.push_back(cond.template cast<T>());
  }
  if (ds.samples.empty()) throw std::invalid_argument("no usable training utterances");
  return ds;
}

// ---- training loop ---------------------------------------------------------------

struct TrainLoopOptions {
  TrainerConfig trainer;
  ModelConfig model;
  long max_steps = 0;  // 0 = run `epochs` full passes
  int epochs = 10;
  double val_fraction = 0.1;
  // Tiny corpora make epochs degenerate; validation/schedule updates never
  // run more often than this many steps.
  long min_eval_interval = 25;
  std::string checkpoint_path;  // written every epoch when non-empty
  uint64_t seed = kDefaultSeed;
  bool log_steps = true;
};

template <typename T>
struct TrainLoopResult {
  SampleRnn<T> model;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::vector<double> val_losses;
};

namespace detail {

// Contiguous (utterance, chunk) slices, one per batch lane, so TBPTT state
// carries within an utterance and resets at utterance boundaries.
struct ChunkRef {
  int utt;
  long begin;  // sample offset
};

}  // namespace detail

template <typename T>
TrainLoopResult<T> run_training(const TrainDataset<T>& ds, const TrainLoopOptions& options,
                                std::ostream& log) {
  const TrainerConfig& tc = options.trainer;
  if (tc.seq_len % kFrameSize4 != 0)
    throw std::invalid_argument("sequence length must be a multiple of 160");

  // validation split by utterance (the last ones); with a single utterance,
  // overfit mode validates on the training clip itself
  const int n_utts = static_cast<int>(ds.samples.size());
  int n_val = n_utts >= 2 ? std::max(1, static_cast<int>(n_utts * options.val_fraction)) : 0;
  const int n_train = n_utts - n_val;

  std::vector<detail::ChunkRef> chunks;
  for (int u = 0; u < n_train; ++u) {
    const long n = static_cast<long>(ds.samples[u].size());
    for (long b = 0; b + tc.seq_len <= n; b += tc.seq_len) chunks.push_back({u, b});
  }
  if (chunks.empty()) throw std::invalid_argument("corpus too short for the sequence length");

  const int lanes = std::max(1, std::min<int>(tc.batch, static_cast<int>(chunks.size())));
  const long per_lane = (static_cast<long>(chunks.size()) + lanes - 1) / lanes;

  TrainLoopResult<T> result;
  result.model = SampleRnn<T>::init(options.model, options.seed);
  AdamState<T> adam(options.model);
  LrSchedule sched;
  sched.lr = tc.lr;

  std::vector<ModelState<T>> lane_state(lanes, ModelState<T>(options.model.hidden));
  std::vector<long> lane_pos(lanes);  // index into this lane's chunk slice
  std::vector<int> lane_prev_utt(lanes, -1);
  std::vector<long> lane_prev_end(lanes, -1);

  auto lane_chunk = [&](int lane, long pos) -> const detail::ChunkRef& {
    const long base = lane * per_lane;
    const long count = std::min<long>(per_lane, static_cast<long>(chunks.size()) - base);
    return chunks[base + pos % count];
  };
  auto lane_count = [&](int lane) {
    const long base = lane * per_lane;
    return std::min<long>(per_lane, static_cast<long>(chunks.size()) - base);
  };

  // With no held-out utterances (overfit mode) the validation pass runs over
  // the training clip itself; either way it is a deterministic function of
  // the parameters, which keeps the plateau schedule free of batch noise.
  auto validation_loss = [&]() {
    const int v_begin = n_val > 0 ? n_train : 0;
    const int v_end = n_val > 0 ? n_utts : n_train;
    double total = 0.0;
    long count = 0;
    for (int u = v_begin; u < v_end; ++u) {
      ModelState<T> state(options.model.hidden);
      const long n = static_cast<long>(ds.samples[u].size());
      for (long b = 0; b + tc.seq_len <= n; b += tc.seq_len) {
        std::vector<int16_t> seg(ds.samples[u].begin() + b, ds.samples[u].begin() + b + tc.seq_len);
        const MatX<T> cond = ds.cond[u].middleCols(b / kFrameSize4, tc.seq_len / kFrameSize4);
        const ForwardResult<T> r = forward_nll(result.model, seg, cond, &state);
        total += static_cast<double>(r.mean_nll) * r.samples;
        count += r.samples;
      }
    }
    if (count == 0) return std::numeric_limits<double>::quiet_NaN();
    return total / count;
  };

  const long steps_per_epoch = std::max(per_lane, options.min_eval_interval);
  const long total_steps =
      options.max_steps > 0 ? options.max_steps : per_lane * options.epochs;

  std::vector<std::vector<int16_t>> seg(lanes);
  std::vector<MatX<T>> seg_cond(lanes);
  for (long step = 0; step < total_steps; ++step) {
    std::vector<TrainItem<T>> items;
    for (int lane = 0; lane < lanes; ++lane) {
      const detail::ChunkRef& ref = lane_chunk(lane, lane_pos[lane]);
      // reset recurrent state unless this chunk directly continues the last one
      if (ref.utt != lane_prev_utt[lane] || ref.begin != lane_prev_end[lane])
        lane_state[lane] = ModelState<T>(options.model.hidden);
      lane_prev_utt[lane] = ref.utt;
      lane_prev_end[lane] = ref.begin + tc.seq_len;
      ++lane_pos[lane];

      seg[lane].assign(ds.samples[ref.utt].begin() + ref.begin,
                       ds.samples[ref.utt].begin() + ref.begin + tc.seq_len);
      seg_cond[lane] = ds.cond[ref.utt].middleCols(ref.begin / kFrameSize4, tc.seq_len / kFrameSize4);
      items.push_back({&seg[lane], &seg_cond[lane], &lane_state[lane]});
    }

    const T loss = train_step<T>(result.model, std::span<const TrainItem<T>>(items), adam,
                                 sched.lr, tc);
    if (step == 0) result.first_loss = static_cast<double>(loss);
    result.last_loss = static_cast<double>(loss);
    if (options.log_steps)
      log << "step=" << step + 1 << " nll=" << static_cast<double>(loss)
          << " bits=" << static_cast<double>(loss) / std::log(2.0) << "\n";

    const bool epoch_end = (step + 1) % steps_per_epoch == 0 || step + 1 == total_steps;
    if (epoch_end) {
      double val = validation_loss();
      if (!std::isfinite(val)) val = static_cast<double>(loss);
      result.val_losses.push_back(val);
      lr_schedule_update(sched, val, tc);
      log << "epoch=" << (step + 1 + steps_per_epoch - 1) / steps_per_epoch << " val_nll=" << val
          << " lr=" << sched.lr << "\n";
      if (!options.checkpoint_path.empty())
        save_checkpoint(options.checkpoint_path, result.model, &adam, &sched);
    }
  }

  return result;
}

// ---- neural decode -----------------------------------------------------------------

template <typename T>
AudioBuffer decode_neural(const std::vector<QuantizedFrame>& frames, OpPointId op_id,
                          const CodebookSet& books, const SampleRnn<T>& model, uint64_t seed) {
  const OperatingPoint& op = OperatingPoint::get(op_id);
  const std::vector<FrameParams> decoded = decode_frames(frames, op, books);
  const Mat cond = conditioning_matrix(decoded, model.scaler, model.cfg.cond_dim);
  const MatX<T> cond_t = cond.template cast<T>();
  const std::vector<int16_t> pcm = generate(model, cond_t, seed);
  AudioBuffer audio;
  audio.samples = from_pcm16(pcm);
  return audio;
}

}  // namespace nvsc
