/* Reads a whole file synchronously and prints its length in bytes. */
#include <fcntl.h>
#include <stdio.h>
#include <unistd.h>

int main(int argc, char **argv) {
    char buf[65536];
    long long total = 0;
    ssize_t got;
    int fd;

    if (argc < 2) {
        fprintf(stderr, "usage: cat-sync <path>\n");
        return 2;
    }
    fd = open(argv[1], O_RDONLY);
    if (fd < 0) {
        perror("open");
        return 1;
    }
    while ((got = read(fd, buf, sizeof buf)) > 0)
        total += got;
    if (got < 0) {
        perror("read");
        close(fd);
        return 1;
    }
    close(fd);
    printf("%lld\n", total);
    return 0;
}
