from models.handover.a3 import A3Tracker, a3_update
from models.handover.attachment import (Attachment, GroupAttachment, initial_attachment, neighbor_scan,
                                        select_serving)
from models.handover.bounding import BoundEstimate, Decision, bound_xs, decide, estimate, slot_aggregates
from models.handover.daps import DapsBuffer, daps_deliver, daps_expire, daps_flush
from models.handover.state_machine import HoMachine, HoParams, HoState, Protocol, new_machine, step, step_sa, step_ws
