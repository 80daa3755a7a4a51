# ui/__init__.py
# 功能：命令行包，入口为 ui.cli:app（安装后命令名 twng）
