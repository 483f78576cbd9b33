"""
Purpose: Interfaces for logging the progress of a training run, one CSV row per epoch.
"""

import os
import time
import datetime
import tempfile

from .const import LOG_FOLDER_NAME

EPOCH_LOG_HEADER = "date,epoch,train_loss,val_mse,grad_norm,wall_clock_s\n"


def _getDefaultLogPath():
    log_folder_path = os.path.join(tempfile.gettempdir(), LOG_FOLDER_NAME)
    if not os.path.exists(log_folder_path):
        os.mkdir(log_folder_path)

    ms_since_epoch = int(1000 * time.time())
    file_name = "epochs_{}.csv".format(ms_since_epoch)
    return os.path.join(log_folder_path, file_name)


class EpochLogger(object):
    """A simple logger to keep track of the epochs of a training run."""

    def __init__(self, **kwargs):
        super(EpochLogger, self).__init__()

        if "file" in kwargs:
            self._file = kwargs["file"]
        elif "path" in kwargs:
            self._file = open(kwargs["path"], "w")
        else:
            self._file = open(_getDefaultLogPath(), "w")

        self._run_start_time = time.perf_counter()
        self._epoch_start_time = self._run_start_time
        self.rows = 0
        self._file.write(EPOCH_LOG_HEADER)
        self._file.flush()

    def log_epoch_start(self):
        self._epoch_start_time = time.perf_counter()

    def log_epoch_end(self, epoch, train_loss, val_mse, grad_norm):
        """
        Write one row. The file is flushed right away so the log of the last finished epoch
        survives a failing run.
        :return float: seconds spent in this epoch
        """
        now = time.perf_counter()
        duration = now - self._epoch_start_time
        isodate = datetime.datetime.now().isoformat()
        row = "{date},{epoch},{train_loss!r},{val_mse!r},{grad_norm!r},{wall:.3f}\n".format(
            date=isodate,
            epoch=epoch,
            train_loss=float(train_loss),
            val_mse=float(val_mse),
            grad_norm=float(grad_norm),
            wall=now - self._run_start_time,
        )
        self._file.write(row)
        self._file.flush()
        self.rows += 1
        return duration

    def close(self):
        self._file.close()
