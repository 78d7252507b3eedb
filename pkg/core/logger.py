import logging
import os
import time
from logging.handlers import TimedRotatingFileHandler

LOGGER_NAME = "qdilog-verify"


class CustomFormatter(logging.Formatter):
    """
    自定义日志格式，将微秒转换为毫秒
    """
    def formatTime(self, record, datefmt=None):
        if datefmt:
            dt = time.strftime(datefmt, time.localtime(record.created))
            ms = int(record.msecs)
            return f"{dt},{ms:03d}"
        return super().formatTime(record, datefmt)


class Logger:
    def __init__(self, log_file="logs/qdilog-verify.log", log_level=logging.INFO, console_output=True):
        self.log_file = log_file
        self.log_level = log_level
        self.console_output = console_output
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(log_level)
        self._setup_logger()

    def _setup_logger(self):
        # 已配置过的logger直接复用处理器，级别按本次参数同步
        if self.logger.handlers:
            self.set_level(self.log_level)
            return

        formatter = CustomFormatter(
            "[%(asctime)s]-[%(levelname)s]-[%(filename)s:%(lineno)d] %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )

        if self.log_file:
            log_dir = os.path.dirname(self.log_file)
            if log_dir and not os.path.exists(log_dir):
                os.makedirs(log_dir)

            # 文件处理器：按日期滚动
            file_handler = TimedRotatingFileHandler(
                self.log_file,
                when="midnight",
                interval=1,
                backupCount=7,
                encoding="utf-8"
            )
            file_handler.setFormatter(formatter)
            file_handler.setLevel(self.log_level)
            self.logger.addHandler(file_handler)

        if self.console_output:
            console_handler = logging.StreamHandler()
            console_handler.setFormatter(formatter)
            console_handler.setLevel(self.log_level)
            self.logger.addHandler(console_handler)

    def get_logger(self):
        return self.logger

    def set_level(self, level):
        self.log_level = level
        self.logger.setLevel(level)
        for handler in self.logger.handlers:
            handler.setLevel(level)

    def reset(self, log_file=None, log_level=None, console_output=None):
        """
        按新的参数重建处理器（命令行覆盖配置文件时使用）
        """
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
            handler.close()
        if log_file is not None:
            self.log_file = log_file
        if log_level is not None:
            self.log_level = log_level
            self.logger.setLevel(log_level)
        if console_output is not None:
            self.console_output = console_output
        self._setup_logger()
        return self.logger


def get_module_logger(logger=None):
    """
    库模块使用：优先使用注入的logger，否则取全局logger（不主动添加处理器）
    """
    return logger or logging.getLogger(LOGGER_NAME)
