from .block import ViLBlock, causal_conv1d, mlstm_block
from .cell import (
    STABILIZER_SENTINEL,
    MlstmParams,
    MlstmState,
    cell_step,
    mlstm_chunkwise,
    mlstm_recurrent,
    mlstm_sequence,
    mlstm_step,
    project,
)

__all__ = [
    "STABILIZER_SENTINEL",
    "MlstmParams",
    "MlstmState",
    "ViLBlock",
    "causal_conv1d",
    "cell_step",
    "mlstm_block",
    "mlstm_chunkwise",
    "mlstm_recurrent",
    "mlstm_sequence",
    "mlstm_step",
    "project",
]
