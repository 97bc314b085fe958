"""
运行记录模块 - 使用 SQLite 数据库记录每次命令行运行

记录只保存在数据库里，从不写入产物，因此产物保持逐字节可复现。
"""

import json
import logging
import os
import time
from contextlib import asynccontextmanager
from datetime import datetime
from typing import Any, AsyncIterator, Dict, List, Optional, Sequence, Tuple

import aiosqlite

logger = logging.getLogger(__name__)

RUN_STATUSES = ('ok', 'invalid', 'io_error', 'failed')

SCHEMA = """
    CREATE TABLE IF NOT EXISTS run_history (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        command TEXT NOT NULL,      -- run / verify / sweep / population
        scenario TEXT,              -- 场景名称或套件列表
        seed TEXT,                  -- 64 位无符号种子，按文本保存
        config_digest TEXT,         -- 规范化配置的 sha256
        status TEXT NOT NULL,       -- ok / invalid / io_error / failed
        exit_code INTEGER NOT NULL,
        output_dir TEXT,
        timestamp INTEGER NOT NULL,
        extra JSON
    );
    CREATE INDEX IF NOT EXISTS idx_run_timestamp ON run_history(timestamp DESC);
    CREATE INDEX IF NOT EXISTS idx_run_command ON run_history(command);
"""

INSERT_RUN = """
    INSERT INTO run_history (command, scenario, seed, config_digest, status, exit_code, output_dir, timestamp, extra)
    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
"""

# 最旧的在前，用于修剪
TRIM_RUNS = """
    DELETE FROM run_history
    WHERE id IN (SELECT id FROM run_history ORDER BY timestamp ASC, id ASC LIMIT ?)
"""


class HistoryError(Exception):
    """运行记录操作错误的基类"""
    pass


class DatabaseError(HistoryError):
    """SQLite 读写失败"""
    pass


def _row_to_dict(row: aiosqlite.Row) -> Dict[str, Any]:
    item = dict(row)
    if item["extra"]:
        item["extra"] = json.loads(item["extra"])
    if item["seed"] is not None:
        item["seed"] = int(item["seed"])
    item["datetime"] = datetime.fromtimestamp(item["timestamp"]).strftime("%Y-%m-%d %H:%M:%S")
    return item


class RunLedger:
    """
    运行记录，按 async with 使用：

        async with RunLedger(path) as ledger:
            await ledger.add_run('run', 'ok', 0, scenario='fig3_fixed_recommendation')
    """

    def __init__(self, db_path: str, max_history: int = 200):
        """
        Args:
            db_path: 数据库文件路径，目录不存在时创建
            max_history: 保留的最大记录数，超出部分从最旧的开始删除
        """
        self.db_path = db_path
        self.max_history = max_history
        self._connection: Optional[aiosqlite.Connection] = None
        db_dir = os.path.dirname(db_path)
        if db_dir and not os.path.isdir(db_dir):
            os.makedirs(db_dir, exist_ok=True)
            logger.info(f"已创建运行记录目录: {db_dir}")

    async def __aenter__(self) -> 'RunLedger':
        await self.init_db()
        return self

    async def __aexit__(self, exc_type, exc, tb) -> None:
        await self.close()

    @asynccontextmanager
    async def _session(self, action: str) -> AsyncIterator[aiosqlite.Connection]:
        """
        取得连接并把任何失败包装成 DatabaseError

        Args:
            action: 写进错误信息的操作名
        """
        try:
            if self._connection is None:
                self._connection = await aiosqlite.connect(self.db_path)
                self._connection.row_factory = aiosqlite.Row
            yield self._connection
        except HistoryError:
            raise
        except Exception as e:
            logger.error(f"{action}失败: {e}")
            raise DatabaseError(f"{action}失败: {e}") from e

    async def close(self) -> None:
        if self._connection is not None:
            await self._connection.close()
            self._connection = None
            logger.debug(f"运行记录数据库已关闭: {self.db_path}")

    async def init_db(self) -> None:
        """建表（幂等）"""
        async with self._session("初始化运行记录表") as conn:
            await conn.executescript(SCHEMA)
            await conn.commit()

    async def add_run(self,
                      command: str,
                      status: str,
                      exit_code: int,
                      scenario: Optional[str] = None,
                      seed: Optional[int] = None,
                      config_digest: Optional[str] = None,
                      output_dir: Optional[str] = None,
                      timestamp: Optional[int] = None,
                      extra: Optional[Dict[str, Any]] = None) -> int:
        """
        写入一条运行记录，随后按 max_history 修剪

        Returns:
            新记录的 ID

        Raises:
            HistoryError: status 不在 RUN_STATUSES 中
            DatabaseError: 写入失败
        """
        if status not in RUN_STATUSES:
            raise HistoryError(f"未知的运行状态: {status}")
        values = (
            command, scenario, None if seed is None else str(seed), config_digest, status, exit_code, output_dir,
            int(time.time()) if timestamp is None else timestamp,
            json.dumps(extra, sort_keys=True, ensure_ascii=False) if extra else None,
        )
        async with self._session("写入运行记录") as conn:
            cursor = await conn.execute(INSERT_RUN, values)
            await conn.commit()
            record_id = cursor.lastrowid
        logger.info(f"已记录运行 #{record_id}: {command} -> {status} (exit={exit_code})")
        await self._trim_history()
        return record_id

    async def get_runs(self,
                       page: int = 1,
                       page_size: int = 20,
                       command: Optional[str] = None) -> Tuple[List[Dict[str, Any]], int]:
        """
        分页读取运行记录，最新的在前

        Returns:
            (当前页记录, 满足过滤条件的总数)
        """
        where, params = ("WHERE command = ?", [command]) if command else ("", [])
        offset = (max(1, page) - 1) * page_size
        async with self._session("读取运行记录") as conn:
            cursor = await conn.execute(f"SELECT COUNT(*) FROM run_history {where}", params)
            (total,) = await cursor.fetchone()
            cursor = await conn.execute(
                f"SELECT * FROM run_history {where} ORDER BY timestamp DESC, id DESC LIMIT ? OFFSET ?",
                params + [page_size, offset],
            )
            rows = await cursor.fetchall()
        return [_row_to_dict(row) for row in rows], total

    async def get_run(self, record_id: int) -> Optional[Dict[str, Any]]:
        async with self._session("读取运行记录") as conn:
            cursor = await conn.execute("SELECT * FROM run_history WHERE id = ?", (record_id,))
            row = await cursor.fetchone()
        return _row_to_dict(row) if row else None

    async def clear_history(self) -> int:
        """删除全部记录，返回删除条数"""
        deleted = await self._delete("DELETE FROM run_history", ())
        logger.info(f"已清空运行记录: {deleted} 条")
        return deleted

    async def _trim_history(self) -> int:
        async with self._session("修剪运行记录") as conn:
            cursor = await conn.execute("SELECT COUNT(*) FROM run_history")
            (total,) = await cursor.fetchone()
        if total <= self.max_history:
            return 0
        deleted = await self._delete(TRIM_RUNS, (total - self.max_history,))
        logger.debug(f"修剪运行记录 {deleted} 条，保留最新的 {self.max_history} 条")
        return deleted

    async def _delete(self, sql: str, params: Sequence[Any]) -> int:
        async with self._session("删除运行记录") as conn:
            cursor = await conn.execute(sql, params)
            await conn.commit()
            return cursor.rowcount
