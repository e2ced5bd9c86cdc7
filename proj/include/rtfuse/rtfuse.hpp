#ifndef RTFUSE_RTFUSE_HPP
#define RTFUSE_RTFUSE_HPP

// Umbrella header: range-thermal fusion library.
//
// A time-of-flight range camera delivers a dense depth image; a thermopile
// array delivers a very low resolution temperature image. This library
// calibrates the pair from shots of a heated circular target, projects
// every range pixel onto the thermal array, upsamples the temperatures
// with one of four algorithms, quantifies the result on synthetic scenes,
// and runs a temperature-gated person tracker on frame sequences.

#include "rtfuse/calibration.hpp"
#include "rtfuse/detection.hpp"
#include "rtfuse/errors.hpp"
#include "rtfuse/fusion.hpp"
#include "rtfuse/geometry.hpp"
#include "rtfuse/image.hpp"
#include "rtfuse/io.hpp"
#include "rtfuse/metrics.hpp"
#include "rtfuse/random.hpp"
#include "rtfuse/simulation.hpp"

#endif  // RTFUSE_RTFUSE_HPP
