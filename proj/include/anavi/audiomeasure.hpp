#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "anavi/predictor.hpp"
#include "anavi/sensing.hpp"

namespace anavi {

struct Waveform {
  int sample_rate = 16000;
  std::vector<double> samples;  // mono, in [-1, 1]

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// RIFF/WAVE, PCM 16-bit or IEEE float 32-bit; channels are averaged.
Waveform parse_wav(const std::string& bytes, const std::string& origin = "<memory>");
Waveform load_wav(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };

// Little-endian RIFF writer; interleaves `channels` (one vector each).
std::string encode_wav(const std::vector<std::vector<double>>& channels, int sample_rate,
                       WavEncoding encoding);
void save_wav(const std::filesystem::path& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::pcm16);

// In-place iterative radix-2 transform; size must be a power of two.
void fft(std::vector<std::complex<double>>& a);

std::size_t next_pow2(std::size_t n);

// Zero-padded transform of a rectangular window over the whole waveform,
// divided by the window length.
std::vector<std::complex<double>> spectrum(const Waveform& w);

struct AirConstants {
  double density = 1.225;
  double sound_speed = 343.0;
};

// Max spectral intensity |W|^2/(rho c), clipped and converted to dB, plus
// the calibration offset.
double waveform_db(const Waveform& w, double calibration_offset = 0.0,
                   const AirConstants& air = {});

struct MeasurementInput {
  std::string label;
  double distance = 0.0;
  std::string direction;  // compass letters (N, SW, ...) or degrees
  std::optional<std::filesystem::path> wav;
  std::optional<double> real_db;  // used when no recording is given
  std::optional<double> y;        // published normalized transfer, bypasses the model
};

struct MeasurementRecord {
  std::string label;
  double distance = 0.0;
  std::string direction;
  double db_measured = 0.0;
  double db_predicted = 0.0;
  double error = 0.0;  // measured - predicted
};

// Bearing in map frame: E = 0, N = pi/2, counterclockwise.
double parse_direction(const std::string& direction);

std::vector<MeasurementInput> load_measurements(const std::filesystem::path& path);

std::vector<MeasurementRecord> compare_table(const std::vector<MeasurementInput>& inputs,
                                             const PredictorModel& model,
                                             const PanoramaScan& scan, double source_db,
                                             double calibration_offset = 0.0);

void write_table_csv(const std::filesystem::path& path,
                     const std::vector<MeasurementRecord>& records);

}  // namespace anavi
