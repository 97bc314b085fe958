"""命令处理器：run / population / sweep / verify / history"""
