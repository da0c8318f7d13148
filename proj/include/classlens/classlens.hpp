#pragma once

#include "classlens/core.hpp"
#include "classlens/ingest.hpp"
#include "classlens/assignment.hpp"
#include "classlens/tracking.hpp"
#include "classlens/actions.hpp"
#include "classlens/dsp.hpp"
#include "classlens/speech.hpp"
#include "classlens/scoring.hpp"
#include "classlens/analytics.hpp"
#include "classlens/config.hpp"
#include "classlens/summary.hpp"
#include "classlens/pipeline.hpp"
#include "classlens/synth.hpp"
