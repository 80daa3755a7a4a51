# config/__init__.py
# 功能：配置资源包
# 内容：templates/run_summary.md.j2 运行摘要模板；examples/*.json 每个命令一份可直接运行的配置
