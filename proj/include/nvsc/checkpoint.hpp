#pragma once

#include <string>

#include "nvsc/container.hpp"
#include "nvsc/samplernn.hpp"
#include "nvsc/trainer.hpp"

namespace nvsc {

// .nvck checkpoint container: a "config" section (ModelConfig, scalar width,
// conditioning standardization), one section per named parameter block with
// explicit shape, optional trainer sections, CRC32 checksum. Floats are
// little-endian, 4 bytes in float mode and 8 bytes in the 64-bit mode used
// for gradient checks and bit-exact resume.
constexpr char kCheckpointMagic[4] = {'N', 'V', 'C', 'K'};
constexpr uint8_t kCheckpointVersion = 1;

struct CheckpointTrainerState {
  bool present = false;
  long adam_step = 0;
  double lr = 0.0;
  double best_val = 0.0;
  int stall = 0;
};

// Scalar width (4 or 8 bytes) stored in a checkpoint's config section.
inline int checkpoint_scalar_width(const std::string& path) {
  const Container c = Container::read(path, kCheckpointMagic, kCheckpointVersion);
  ByteReader r(c.get("config"));
  r.get_u32();
  r.get_u32();
  r.get_u32();
  return r.get_u8();
}

namespace detail {

template <typename Block>
std::vector<uint8_t> pack_block(const Block& m) {
  using T = typename Block::Scalar;
  ByteWriter w;
  w.put_u32(static_cast<uint32_t>(m.rows()));
  w.put_u32(static_cast<uint32_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if constexpr (sizeof(T) == 8)
        w.put_f64(static_cast<double>(m(i, j)));
      else
        w.put_f32(static_cast<float>(m(i, j)));
    }
  return w.take();
}

template <typename T, typename Block>
void unpack_block(const std::vector<uint8_t>& bytes, Block& m, const std::string& name) {
  ByteReader r(bytes);
  const uint32_t rows = r.get_u32();
  const uint32_t cols = r.get_u32();
  if (rows != static_cast<uint32_t>(m.rows()) || cols != static_cast<uint32_t>(m.cols()))
    throw FormatError("checkpoint block '" + name + "' has shape " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", expected " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
  for (uint32_t j = 0; j < cols; ++j)
    for (uint32_t i = 0; i < rows; ++i) {
      if constexpr (sizeof(T) == 8)
        m(i, j) = static_cast<T>(r.get_f64());
      else
        m(i, j) = static_cast<T>(r.get_f32());
    }
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const SampleRnn<T>& model,
                     const AdamState<T>* adam = nullptr, const LrSchedule* sched = nullptr) {
  Container c;
  {
    ByteWriter w;
    w.put_u32(static_cast<uint32_t>(model.cfg.hidden));
    w.put_u32(static_cast<uint32_t>(model.cfg.cond_dim));
    w.put_u32(static_cast<uint32_t>(model.cfg.n_mix));
    w.put_u8(sizeof(T));
    w.put_f64(model.scaler.f0_mean);
    w.put_f64(model.scaler.f0_std);
    w.put_f64(model.scaler.s_db_mean);
    w.put_f64(model.scaler.s_db_std);
    c.set("config", w.take());
  }
  model.visit([&](const std::string& name, const auto& block) {
    c.set("param." + name, detail::pack_block(block));
  });
  if (adam) {
    adam->m.visit([&](const std::string& name, const auto& block) {
      c.set("adam.m." + name, detail::pack_block(block));
    });
    adam->v.visit([&](const std::string& name, const auto& block) {
      c.set("adam.v." + name, detail::pack_block(block));
    });
    ByteWriter w;
    w.put_u64(static_cast<uint64_t>(adam->step));
    w.put_f64(sched ? sched->lr : 0.0);
    w.put_f64(sched ? sched->best : 0.0);
    w.put_u32(sched ? static_cast<uint32_t>(sched->stall) : 0);
    c.set("trainer", w.take());
  }
  c.write(path, kCheckpointMagic, kCheckpointVersion);
}

template <typename T>
SampleRnn<T> load_checkpoint(const std::string& path, AdamState<T>* adam = nullptr,
                             CheckpointTrainerState* trainer = nullptr) {
  const Container c = Container::read(path, kCheckpointMagic, kCheckpointVersion);

  ByteReader r(c.get("config"));
  ModelConfig cfg;
  cfg.hidden = static_cast<int>(r.get_u32());
  cfg.cond_dim = static_cast<int>(r.get_u32());
  cfg.n_mix = static_cast<int>(r.get_u32());
  const uint8_t width = r.get_u8();
  if (width != sizeof(T))
    throw FormatError("checkpoint scalar width " + std::to_string(width) + " does not match " +
                      std::to_string(sizeof(T)));

  SampleRnn<T> model;
  model.resize(cfg);
  model.scaler.f0_mean = r.get_f64();
  model.scaler.f0_std = r.get_f64();
  model.scaler.s_db_mean = r.get_f64();
  model.scaler.s_db_std = r.get_f64();

  model.visit([&](const std::string& name, auto& block) {
    detail::unpack_block<T>(c.get("param." + name), block, name);
  });

  if (adam && c.has("trainer")) {
    adam->m.resize(cfg);
    adam->v.resize(cfg);
    adam->m.visit([&](const std::string& name, auto& block) {
      detail::unpack_block<T>(c.get("adam.m." + name), block, name);
    });
    adam->v.visit([&](const std::string& name, auto& block) {
      detail::unpack_block<T>(c.get("adam.v." + name), block, name);
    });
  }
  if (c.has("trainer")) {
    ByteReader tr(c.get("trainer"));
    const long step = static_cast<long>(tr.get_u64());
    if (adam) adam->step = step;
    if (trainer) {
      trainer->present = true;
      trainer->adam_step = step;
      trainer->lr = tr.get_f64();
      trainer->best_val = tr.get_f64();
      trainer->stall = static_cast<int>(tr.get_u32());
    }
  }
  return model;
}

}  // namespace nvsc
