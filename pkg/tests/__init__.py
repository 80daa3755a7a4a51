# tests/__init__.py
# 功能：测试包，按数值模块（网格、DPP、博弈、游走势垒、参考解）与命令行各分一个文件
# 公共夹具见 conftest.py
