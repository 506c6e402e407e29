#include <cstdio>

int main() {
  std::puts("treeopt cli placeholder");
  return 0;
}
