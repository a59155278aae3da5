#pragma once

namespace digitrec {

// Command-line surface: scan, validate, synth, augment, featurize, train,
// evaluate, crossval, predict, report. Every run writes a run.json with the
// effective config, seed, and CRC32 of each artifact written.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 divergence.
int run_cli(int argc, const char* const* argv);

}  // namespace digitrec
