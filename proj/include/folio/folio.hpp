#pragma once

#include "folio/config.hpp"
#include "folio/decoder.hpp"
#include "folio/edit_distance.hpp"
#include "folio/error.hpp"
#include "folio/geometry.hpp"
#include "folio/lm.hpp"
#include "folio/losses.hpp"
#include "folio/matching.hpp"
#include "folio/metrics.hpp"
#include "folio/oracle.hpp"
#include "folio/page.hpp"
#include "folio/predictions.hpp"
#include "folio/pseudolabels.hpp"
#include "folio/random.hpp"
#include "folio/serialize.hpp"
#include "folio/simloop.hpp"
#include "folio/store.hpp"
#include "folio/svg.hpp"
#include "folio/synth.hpp"
