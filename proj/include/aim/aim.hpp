// Everything at once: simulator, front ends, tracker, multi-array fusion, identification and I/O.
#pragma once

#include "aim/config.hpp"
#include "aim/core.hpp"
#include "aim/doa.hpp"
#include "aim/dynamics.hpp"
#include "aim/eval.hpp"
#include "aim/flight.hpp"
#include "aim/geometry.hpp"
#include "aim/ident.hpp"
#include "aim/io.hpp"
#include "aim/multiarray.hpp"
#include "aim/pipeline.hpp"
#include "aim/profile.hpp"
#include "aim/scenario.hpp"
#include "aim/spectral.hpp"
#include "aim/synth.hpp"
#include "aim/tracker.hpp"
